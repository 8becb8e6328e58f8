//! Command-line front end for the antiplane dislocation toolkit.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use antiplane::audit::{run_audit, AuditConfig};
use antiplane::elastic::ReferenceField;
use antiplane::energy::EnergyState;
use antiplane::forms::{
    fmt_f64, read_displacement_csv, write_displacement_csv, write_form_csv, write_integer_form_csv,
};
use antiplane::relax::{
    decay_experiment, dipole_experiment, halfspace_relax, initial_superpose, relax_state, DecayVariant,
    ExperimentRecord, ReferenceKind, RelaxConfig, RelaxResult,
};
use antiplane::topology::{beta_form, detect_cores_masked, dmcp, net_burgers, CoreSet};
use antiplane::{Cell, Displacement, LatticeDomain, PotentialSpec, SCHEMA_VERSION};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

/// Environment variable that overrides the configured output directory.
const OUTPUT_DIR_ENV: &str = "ANTIPLANE_OUTPUT_DIR";
const EFFECTIVE_CONFIG: &str = "effective_config.toml";

#[derive(Parser, Debug)]
#[command(name = "antiplane", version, about = "Screw dislocations on the triangular lattice")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; unspecified keys take their defaults.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config file and the environment).
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    radius: Option<f64>,
    #[arg(long, global = true, value_enum)]
    potential: Option<PotentialArg>,
    /// Stiffness of psi_lin.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Displacement CSV (`n,m,value`) used as the initial corrector.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Subcommand, Debug, Clone)]
enum Command {
    /// Relax a corrector and record energy, cores and net Burgers vector.
    Relax,
    /// Detect dislocation cores of a configuration.
    Cores,
    /// Net Burgers vector of a configuration.
    Burgers,
    /// Minimal branch cuts connecting the cores.
    Cuts,
    /// Single-core relaxation and decay exponent of the corrector.
    Decay,
    /// Dipole annihilation experiment over the configured separations.
    Dipole {
        /// Separations to run (replaces the configured list).
        #[arg(long = "separation")]
        separations: Vec<usize>,
    },
    /// Core near a free surface, over the configured depths.
    Halfspace {
        #[arg(long = "depth")]
        depths: Vec<f64>,
    },
    /// Numerical audit of the analytic inequalities.
    Audit,
    /// Export the reference strain and residual forces as CSV.
    Reference,
    /// Re-run the subcommand recorded in a configuration file.
    Run { file: PathBuf },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PotentialArg {
    Lin,
    Cos,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Task {
    Relax,
    Cores,
    Burgers,
    Cuts,
    Decay,
    Dipole,
    Halfspace,
    Audit,
    Reference,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("task serializes");
        write!(f, "{}", s.as_str().expect("unit variant"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoreSpec {
    cell: Cell,
    sign: i32,
}

/// Initial corrector: a CSV file, a superposition of cores, or zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct InitialConfig {
    input: Option<PathBuf>,
    /// Reference for a corrector read from `input`.
    reference: Option<ReferenceKind>,
    cores: Vec<CoreSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DipoleConfig {
    separations: Vec<usize>,
}

impl Default for DipoleConfig {
    fn default() -> Self {
        DipoleConfig { separations: vec![2, 3, 4, 6] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct HalfspaceConfig {
    depths: Vec<f64>,
}

impl Default for HalfspaceConfig {
    fn default() -> Self {
        HalfspaceConfig { depths: vec![2.0, 20.0] }
    }
}

/// Everything a run depends on.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    subcommand: Option<Task>,
    output_dir: PathBuf,
    potential: PotentialSpec,
    relax: RelaxConfig,
    initial: InitialConfig,
    decay: DecayVariant,
    dipole: DipoleConfig,
    halfspace: HalfspaceConfig,
    audit: AuditConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            subcommand: None,
            output_dir: PathBuf::from("out"),
            potential: PotentialSpec::default(),
            relax: RelaxConfig::default(),
            initial: InitialConfig::default(),
            decay: DecayVariant::Symmetric,
            dipole: DipoleConfig::default(),
            halfspace: HalfspaceConfig::default(),
            audit: AuditConfig::default(),
        }
    }
}

/// Problems with the configuration itself, as opposed to failures of a run.
#[derive(Debug)]
struct ConfigError(String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug)]
struct AuditFailed(usize);

impl fmt::Display for AuditFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "audit: {} asserted checks failed", self.0)
    }
}

impl std::error::Error for AuditFailed {}

fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())).into())
}

/// Merges file, environment and flags (in increasing priority) into one configuration.
fn resolve(cli: &Cli) -> Result<(Task, RunConfig)> {
    let (file, task) = match &cli.command {
        Command::Run { file } => (Some(file), None),
        _ => (cli.config.as_ref(), Some(task_of(&cli.command))),
    };
    let mut cfg = match file {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    let task = match (task, cfg.subcommand) {
        (Some(t), _) => t,
        (None, Some(t)) => t,
        (None, None) => return Err(ConfigError("the configuration names no subcommand".into()).into()),
    };
    cfg.subcommand = Some(task);
    if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
        cfg.output_dir = PathBuf::from(dir);
    }
    if let Some(dir) = &cli.out {
        cfg.output_dir = dir.clone();
    }
    if let Some(r) = cli.radius {
        cfg.relax.radius = r;
    }
    match (cli.potential, cli.lambda) {
        (Some(PotentialArg::Cos), Some(_)) => return Err(ConfigError("--lambda applies to psi_lin only".into()).into()),
        (Some(PotentialArg::Cos), None) => cfg.potential = PotentialSpec::Cos,
        (Some(PotentialArg::Lin), l) => cfg.potential = PotentialSpec::Lin { lambda: l.unwrap_or(1.0) },
        (None, Some(l)) => cfg.potential = PotentialSpec::Lin { lambda: l },
        (None, None) => {}
    }
    if let Some(n) = cli.max_iter {
        cfg.relax.max_iter = n;
    }
    if let Some(t) = cli.tolerance {
        cfg.relax.tolerance = t;
    }
    if let Some(s) = cli.seed {
        cfg.relax.seed = s;
    }
    if let Some(p) = &cli.input {
        cfg.initial.input = Some(p.clone());
    }
    match &cli.command {
        Command::Dipole { separations } if !separations.is_empty() => cfg.dipole.separations = separations.clone(),
        Command::Halfspace { depths } if !depths.is_empty() => cfg.halfspace.depths = depths.clone(),
        _ => {}
    }
    cfg.potential.validate()?;
    cfg.relax.validate()?;
    if cfg.initial.input.is_some() && !cfg.initial.cores.is_empty() {
        return Err(ConfigError("initial.input and initial.cores are mutually exclusive".into()).into());
    }
    Ok((task, cfg))
}

fn task_of(c: &Command) -> Task {
    match c {
        Command::Relax => Task::Relax,
        Command::Cores => Task::Cores,
        Command::Burgers => Task::Burgers,
        Command::Cuts => Task::Cuts,
        Command::Decay => Task::Decay,
        Command::Dipole { .. } => Task::Dipole,
        Command::Halfspace { .. } => Task::Halfspace,
        Command::Audit => Task::Audit,
        Command::Reference => Task::Reference,
        Command::Run { .. } => unreachable!("resolved from the file"),
    }
}

/// Writes artifacts into the output directory.
struct Output {
    dir: PathBuf,
}

impl Output {
    fn new(dir: &Path) -> Result<Output> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Output { dir: dir.to_path_buf() })
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn json_rows<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<()> {
        let mut w = self.create(name)?;
        for r in rows {
            serde_json::to_writer(&mut w, r)?;
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    fn displacement(&self, name: &str, domain: &LatticeDomain, u: &Displacement) -> Result<()> {
        write_displacement_csv(domain, u, self.create(name)?)?;
        Ok(())
    }
}

/// Initial corrector with the reference it is measured against.
fn initial_state(cfg: &RunConfig, domain: &LatticeDomain) -> Result<(Displacement, ReferenceKind)> {
    if let Some(p) = &cfg.initial.input {
        let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
        let u = read_displacement_csv(domain, f)?;
        return Ok((u, cfg.initial.reference.unwrap_or(ReferenceKind::Yhat)));
    }
    if !cfg.initial.cores.is_empty() {
        let cores: Vec<(Cell, i32)> = cfg.initial.cores.iter().map(|c| (c.cell, c.sign)).collect();
        let sup = initial_superpose(domain, &cores, cfg.relax.active())?;
        return Ok((sup.u, sup.reference));
    }
    Ok((Displacement::zeros(domain), cfg.initial.reference.unwrap_or(ReferenceKind::Yhat)))
}

fn energy_state<'d>(cfg: &RunConfig, domain: &'d LatticeDomain, kind: ReferenceKind) -> Result<EnergyState<'d>> {
    Ok(EnergyState::new(domain, cfg.potential, kind.build(domain), cfg.relax.active())?)
}

#[derive(Serialize)]
struct CoreReport {
    schema_version: u32,
    reference: ReferenceKind,
    cores: CoreSet,
    net_burgers: i64,
}

fn census(state: &EnergyState, u: &Displacement) -> Result<(CoreSet, i64)> {
    let alpha = state.alpha(u)?;
    let cores = detect_cores_masked(state.domain(), &alpha, &state.cell_mask())?;
    let net = net_burgers(state.domain(), &alpha)?;
    Ok((cores, net))
}

fn cmd_relax(cfg: &RunConfig, out: &Output) -> Result<String> {
    let domain = cfg.relax.domain()?;
    let (u0, kind) = initial_state(cfg, &domain)?;
    let state = energy_state(cfg, &domain, kind)?;
    let r: RelaxResult = relax_state(&state, &state.clamp(&u0), &cfg.relax)?;
    let (cores, net) = census(&state, &r.u)?;
    #[derive(Serialize)]
    struct Report<'a> {
        schema_version: u32,
        reference: ReferenceKind,
        initial_energy: f64,
        energy: f64,
        iterations: usize,
        converged: bool,
        max_residual: f64,
        perturbed: bool,
        cores: &'a CoreSet,
        net_burgers: i64,
        energy_trace: &'a [f64],
    }
    out.json(
        "relax.json",
        &Report {
            schema_version: SCHEMA_VERSION,
            reference: kind,
            initial_energy: r.initial_energy,
            energy: r.energy,
            iterations: r.iterations,
            converged: r.converged,
            max_residual: r.max_residual,
            perturbed: r.perturbed,
            cores: &cores,
            net_burgers: net,
            energy_trace: &r.energy_trace,
        },
    )?;
    out.displacement("displacement.csv", &domain, &r.u)?;
    Ok(format!(
        "relax: {} after {} iterations, max residual {:.3e}\nenergy {:.9e} (initial {:.9e})\ncores: {} positive, {} negative; net Burgers vector {net}",
        if r.converged { "converged" } else { "incomplete" },
        r.iterations,
        r.max_residual,
        r.energy,
        r.initial_energy,
        cores.positive.len(),
        cores.negative.len(),
    ))
}

fn cmd_cores(cfg: &RunConfig, out: &Output, task: Task) -> Result<String> {
    let domain = cfg.relax.domain()?;
    let (u, kind) = initial_state(cfg, &domain)?;
    let state = energy_state(cfg, &domain, kind)?;
    let (cores, net) = census(&state, &u)?;
    let report = CoreReport { schema_version: SCHEMA_VERSION, reference: kind, cores, net_burgers: net };
    if task == Task::Burgers {
        out.json("burgers.json", &report)?;
        return Ok(format!("net Burgers vector: {net}"));
    }
    out.json("cores.json", &report)?;
    let list = |v: &[Cell]| v.iter().map(|c| format!("{c:?}")).collect::<Vec<_>>().join(", ");
    Ok(format!(
        "positive cores ({}): {}\nnegative cores ({}): {}\nnet Burgers vector: {net}",
        report.cores.positive.len(),
        list(&report.cores.positive),
        report.cores.negative.len(),
        list(&report.cores.negative)
    ))
}

fn cmd_cuts(cfg: &RunConfig, out: &Output) -> Result<String> {
    let domain = cfg.relax.domain()?;
    let (u, kind) = initial_state(cfg, &domain)?;
    if kind != ReferenceKind::Yhat {
        return Err(ConfigError("cuts are defined for correctors of the yhat reference".into()).into());
    }
    let state = energy_state(cfg, &domain, kind)?;
    let alpha = state.alpha(&u)?;
    let beta = beta_form(&domain, &alpha);
    let cut = dmcp(&domain, &u, &beta)?;
    let summary = cut.summary();
    #[derive(Serialize)]
    struct Report<'a> {
        schema_version: u32,
        #[serde(flatten)]
        summary: &'a antiplane::topology::CutSummary,
    }
    out.json("cuts.json", &Report { schema_version: SCHEMA_VERSION, summary: &summary })?;
    write_integer_form_csv(&domain, &cut.z, out.create("cut_z.csv")?)?;
    out.displacement("shifted_displacement.csv", &domain, &cut.apply(&u))?;
    Ok(format!(
        "{} cuts, total length {} (before: {})",
        summary.cuts.len(),
        summary.length,
        summary.initial_length
    ))
}

fn cmd_decay(cfg: &RunConfig, out: &Output) -> Result<String> {
    let (rec, res) = decay_experiment(&cfg.relax, cfg.potential, cfg.decay)?;
    out.json("decay.json", &rec)?;
    out.displacement("displacement.csv", &cfg.relax.domain()?, &res.u)?;
    Ok(format!(
        "decay: fitted exponent {:.4} ({}, {} iterations)",
        rec.fitted_exponent.unwrap_or(f64::NAN),
        if rec.converged { "converged" } else { "incomplete" },
        rec.iterations
    ))
}

/// Runs independent experiments on scoped threads; rows keep the input order.
fn fan_out<K: Sync, F>(keys: &[K], run: F) -> Result<Vec<ExperimentRecord>>
where
    F: Fn(&K) -> antiplane::Result<ExperimentRecord> + Sync,
{
    let results: Vec<antiplane::Result<ExperimentRecord>> = std::thread::scope(|s| {
        let handles: Vec<_> = keys.iter().map(|k| s.spawn(|| run(k))).collect();
        handles.into_iter().map(|h| h.join().expect("experiment thread panicked")).collect()
    });
    Ok(results.into_iter().collect::<antiplane::Result<Vec<_>>>()?)
}

fn cmd_dipole(cfg: &RunConfig, out: &Output) -> Result<String> {
    let rows = fan_out(&cfg.dipole.separations, |&l| dipole_experiment(l, &cfg.relax, cfg.potential).map(|r| r.0))?;
    out.json_rows("dipole.jsonl", &rows)?;
    let lines: Vec<String> = cfg
        .dipole
        .separations
        .iter()
        .zip(&rows)
        .map(|(l, r)| format!("L = {l}: {} (energy {:.6e})", r.outcome, r.energy))
        .collect();
    Ok(lines.join("\n"))
}

fn cmd_halfspace(cfg: &RunConfig, out: &Output) -> Result<String> {
    let rows = fan_out(&cfg.halfspace.depths, |&l| halfspace_relax(l, &cfg.relax, cfg.potential).map(|r| r.0))?;
    out.json_rows("halfspace.jsonl", &rows)?;
    let lines: Vec<String> = cfg
        .halfspace
        .depths
        .iter()
        .zip(&rows)
        .map(|(l, r)| format!("depth {l}: {} ({} cores remain)", r.outcome, r.cores_after.count()))
        .collect();
    Ok(lines.join("\n"))
}

fn cmd_audit(cfg: &RunConfig, out: &Output) -> Result<String> {
    let report = run_audit(&cfg.potential, &cfg.audit)?;
    out.json("audit.json", &report)?;
    let json = serde_json::to_string_pretty(&report)?;
    let failures = report.failures().len();
    let text = format!(
        "{}\n{}\naudit: {}",
        report.table(),
        json,
        if failures == 0 { "all asserted checks pass".to_string() } else { format!("{failures} asserted checks failed") }
    );
    if failures > 0 {
        println!("{text}");
        return Err(AuditFailed(failures).into());
    }
    Ok(text)
}

fn cmd_reference(cfg: &RunConfig, out: &Output) -> Result<String> {
    let domain = LatticeDomain::new(cfg.relax.radius)?;
    let field = ReferenceField::new(&domain, &cfg.potential);
    write_form_csv(&domain, &field.alpha_hat, out.create("alpha_hat.csv")?)?;
    let mut w = out.create("reference_forces.csv")?;
    writeln!(w, "n,m,x,y,force")?;
    let mut complete = 0;
    for (i, s) in domain.sites().iter().enumerate() {
        if let Some(f) = field.force(i) {
            let x = s.position();
            writeln!(w, "{},{},{},{},{}", s.n, s.m, fmt_f64(x[0]), fmt_f64(x[1]), fmt_f64(f))?;
            complete += 1;
        }
    }
    w.flush()?;
    Ok(format!(
        "reference: {} bonds in alpha_hat.csv, {complete} site forces in reference_forces.csv",
        domain.num_bonds()
    ))
}

fn execute(cli: &Cli) -> Result<()> {
    let (task, cfg) = resolve(cli)?;
    let effective = toml::to_string(&cfg).context("serializing the effective configuration")?;
    if cli.print_config {
        print!("{effective}");
        return Ok(());
    }
    let out = Output::new(&cfg.output_dir)?;
    fs::write(out.dir.join(EFFECTIVE_CONFIG), &effective)?;
    let summary = match task {
        Task::Relax => cmd_relax(&cfg, &out)?,
        Task::Cores | Task::Burgers => cmd_cores(&cfg, &out, task)?,
        Task::Cuts => cmd_cuts(&cfg, &out)?,
        Task::Decay => cmd_decay(&cfg, &out)?,
        Task::Dipole => cmd_dipole(&cfg, &out)?,
        Task::Halfspace => cmd_halfspace(&cfg, &out)?,
        Task::Audit => cmd_audit(&cfg, &out)?,
        Task::Reference => cmd_reference(&cfg, &out)?,
    };
    println!("{summary}");
    eprintln!("{task}: outputs in {}", out.dir.display());
    Ok(())
}

/// Exit status for each error category; clap itself uses 2 for usage errors.
fn exit_code(err: &anyhow::Error) -> u8 {
    use antiplane::Error as E;
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return 3;
        }
        if cause.is::<AuditFailed>() {
            return 20;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::InvalidParameter(_) => 4,
                E::OutsideDomain(_) => 5,
                E::HalfIntegerBond { .. } => 6,
                E::UnbalancedCores { .. } => 7,
                E::FarField { .. } => 8,
                E::NotGeodesic(_) => 9,
                E::NoPositiveCore => 10,
                E::EnergyMismatch(_) => 11,
                E::Internal(_) => 12,
                E::Format(_) => 13,
                E::Io(_) => 14,
            };
        }
        if cause.is::<std::io::Error>() {
            return 14;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
