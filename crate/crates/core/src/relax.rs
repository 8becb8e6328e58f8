//! Local minimisation of the energy and the numerical experiments built on it.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::elastic::yhat;
use crate::energy::{EnergyState, Reference};
use crate::error::{Error, Result};
use crate::forms::{wrap_value, Displacement};
use crate::lattice::{locate_cell, Cell, Dir, DistToOrigin, LatticeDomain, MIN_RADIUS};
use crate::potential::PotentialSpec;
use crate::topology::{detect_cores_masked, net_burgers, CoreSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelaxConfig {
    pub radius: f64,
    /// Defaults to `radius - 2`.
    pub active_radius: Option<f64>,
    /// Target on the largest residual force.
    pub tolerance: f64,
    pub max_iter: usize,
    /// Sufficient-decrease constant of the backtracking line search.
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Polak-Ribiere conjugate directions; plain steepest descent when false.
    pub conjugate: bool,
    /// Seed for the perturbation applied after hitting a half-integer bond.
    pub seed: u64,
}

impl Default for RelaxConfig {
    fn default() -> Self {
        RelaxConfig {
            radius: 30.0,
            active_radius: None,
            tolerance: 1e-8,
            max_iter: 20_000,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 60,
            conjugate: true,
            seed: 0,
        }
    }
}

impl RelaxConfig {
    pub fn with_radius(radius: f64) -> RelaxConfig {
        RelaxConfig { radius, ..Default::default() }
    }

    pub fn active(&self) -> f64 {
        self.active_radius.unwrap_or(self.radius - 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.radius >= MIN_RADIUS + 2.0) || !self.radius.is_finite() {
            return bad(format!("radius {} must be at least {}", self.radius, MIN_RADIUS + 2.0));
        }
        if !(self.tolerance > 0.0) {
            return bad(format!("tolerance {} must be positive", self.tolerance));
        }
        let a = self.active();
        if !(a > 0.0) || a > self.radius - 2.0 {
            return bad(format!("active radius {a} must lie in (0, R - 2]"));
        }
        if !(self.armijo > 0.0 && self.armijo < 0.5) || !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("line search constants out of range".into());
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<LatticeDomain> {
        self.validate()?;
        LatticeDomain::new(self.radius)
    }
}

#[derive(Clone, Debug)]
pub struct RelaxResult {
    pub u: Displacement,
    pub initial_energy: f64,
    pub energy: f64,
    pub max_residual: f64,
    pub iterations: usize,
    /// False when the budget ran out or the line search stalled.
    pub converged: bool,
    /// Whether the half-integer perturbation was used.
    pub perturbed: bool,
    /// Energy after each accepted step.
    pub energy_trace: Vec<f64>,
}

const PERTURBATION: f64 = 1e-7;

/// Minimises the energy of `state` from `u0` by nonlinear conjugate gradients with a
/// backtracking line search started from the quadratic-model step.
pub fn relax_state(state: &EnergyState, u0: &Displacement, cfg: &RelaxConfig) -> Result<RelaxResult> {
    cfg.validate()?;
    let initial_energy = state.e_extended(u0)?;
    let mut u = u0.clone();
    let mut energy = state.energy(&u);
    let mut g = state.gradient(&u);
    let mut d = g.axpy(-2.0, &g);
    let mut trace = Vec::new();
    let mut perturbed = false;
    let mut iterations = 0;
    let mut t_prev = 1.0;
    loop {
        let max_residual = g.max_abs();
        if max_residual <= cfg.tolerance || iterations >= cfg.max_iter {
            return Ok(RelaxResult {
                u,
                initial_energy,
                energy: initial_energy + energy - state.energy(u0),
                max_residual,
                iterations,
                converged: max_residual <= cfg.tolerance,
                perturbed,
                energy_trace: trace,
            });
        }
        let mut slope = g.dot(&d);
        if slope >= 0.0 {
            d = g.axpy(-2.0, &g);
            slope = g.dot(&d);
        }
        let curvature = match state.hessian_apply(&u, &d) {
            Ok(c) => c,
            Err(Error::HalfIntegerBond { bond }) => {
                if perturbed {
                    return Err(Error::HalfIntegerBond { bond });
                }
                perturbed = true;
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                for &i in state.free_sites() {
                    u[i] += PERTURBATION * rng.gen_range(-1.0..1.0);
                }
                energy = state.energy(&u);
                g = state.gradient(&u);
                d = g.axpy(-2.0, &g);
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut t = if curvature > 0.0 { -slope / curvature } else { 2.0 * t_prev };
        let mut accepted = None;
        for _ in 0..cfg.max_backtracks {
            let de = state.energy_delta(&u, &d, t);
            if de <= cfg.armijo * t * slope {
                accepted = Some(de);
                break;
            }
            t *= cfg.backtrack;
        }
        let Some(de) = accepted else {
            if d.sub(&g.axpy(-2.0, &g)).max_abs() == 0.0 {
                // Steepest descent failed as well: round-off floor.
                let max_residual = g.max_abs();
                return Ok(RelaxResult {
                    u,
                    initial_energy,
                    energy: initial_energy + energy - state.energy(u0),
                    max_residual,
                    iterations,
                    converged: false,
                    perturbed,
                    energy_trace: trace,
                });
            }
            d = g.axpy(-2.0, &g);
            continue;
        };
        assert!(de <= 0.0, "accepted step increased the energy by {de}");
        u = u.axpy(t, &d);
        energy += de;
        trace.push(energy);
        t_prev = t;
        iterations += 1;
        let g_new = state.gradient(&u);
        let beta = if cfg.conjugate {
            (g_new.dot(&g_new.sub(&g)) / g.dot(&g)).max(0.0)
        } else {
            0.0
        };
        d = g_new.axpy(-2.0, &g_new).axpy(beta, &d);
        g = g_new;
    }
}

/// Relaxes a corrector of the `yhat` reference on a disk domain of radius `cfg.radius`.
pub fn relax(domain: &LatticeDomain, u0: &Displacement, cfg: &RelaxConfig, p: PotentialSpec) -> Result<RelaxResult> {
    if domain.radius() != cfg.radius {
        return Err(Error::InvalidParameter(format!(
            "domain radius {} differs from configured {}",
            domain.radius(),
            cfg.radius
        )));
    }
    cfg.validate()?;
    let state = EnergyState::new(domain, p, Reference::yhat(domain), cfg.active())?;
    relax_state(&state, u0, cfg)
}

/// Reference a superposition is measured against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    /// `yhat`, for net Burgers vector 1.
    Yhat,
    /// The undeformed lattice, for net Burgers vector 0.
    Flat,
}

impl ReferenceKind {
    pub fn build(self, domain: &LatticeDomain) -> Reference {
        match self {
            ReferenceKind::Yhat => Reference::yhat(domain),
            ReferenceKind::Flat => Reference::flat(domain),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Superposition {
    pub u: Displacement,
    pub reference: ReferenceKind,
}

/// Smooth cut-off equal to 1 up to `r0` and 0 from `r1` on.
fn taper(r: f64, r0: f64, r1: f64) -> f64 {
    if r <= r0 {
        1.0
    } else if r >= r1 {
        0.0
    } else {
        0.5 * (1.0 + (PI * (r - r0) / (r1 - r0)).cos())
    }
}

/// Corrector for `sum_j s_j yhat(. - x^{C_j})`: the pointwise difference from the
/// reference (`yhat` for net sign 1, the flat lattice for net sign 0), reduced mod 1
/// and tapered to zero at the active radius.
pub fn initial_superpose(domain: &LatticeDomain, cores: &[(Cell, i32)], active_radius: f64) -> Result<Superposition> {
    for (k, &(c, s)) in cores.iter().enumerate() {
        if s != 1 && s != -1 {
            return Err(Error::InvalidParameter(format!("core sign {s} is not +-1")));
        }
        if cores[..k].iter().any(|&(o, _)| o == c) {
            return Err(Error::InvalidParameter(format!("cell {c:?} listed twice")));
        }
    }
    let reach = cores.iter().map(|(c, _)| c.barycentre()).map(|x| x[0].hypot(x[1])).fold(0.0, f64::max);
    if reach + 3.0 > active_radius || active_radius > domain.radius() - 1.0 {
        return Err(Error::OutsideDomain(format!(
            "cores reach radius {reach}, active radius {active_radius}"
        )));
    }
    let reference = match cores.iter().map(|&(_, s)| s as i64).sum::<i64>() {
        1 => ReferenceKind::Yhat,
        0 => ReferenceKind::Flat,
        n => return Err(Error::InvalidParameter(format!("net sign {n}; only 0 and 1 are supported"))),
    };
    let r0 = (0.5 * active_radius).max(reach + 2.0);
    let mut values = Vec::with_capacity(domain.num_sites());
    for &s in domain.sites() {
        let x = s.position();
        let mut v = 0.0;
        for &(c, sign) in cores {
            let b = c.barycentre();
            v += sign as f64 * yhat([x[0] - b[0], x[1] - b[1]])?;
        }
        if reference == ReferenceKind::Yhat {
            v -= yhat(x)?;
        }
        values.push(wrap_value(v) * taper(s.norm(), r0, active_radius));
    }
    Ok(Superposition { u: Displacement::from_values(values), reference })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    /// `(r, max value)` per annulus, at the radius where the maximum is attained.
    pub points: Vec<(f64, f64)>,
}

/// Least-squares slope of `log(max value)` against `log r` over unit annuli covering
/// `[r_min, r_max]`.
pub fn annulus_fit(samples: &[(f64, f64)], r_min: f64, r_max: f64) -> Result<DecayFit> {
    if !(r_min > 0.0 && r_max > r_min + 1.0) {
        return Err(Error::InvalidParameter(format!("annulus range [{r_min}, {r_max}]")));
    }
    let n = (r_max - r_min).floor() as usize;
    let mut max = vec![(f64::NAN, f64::NAN); n];
    for &(r, v) in samples {
        if r < r_min || r >= r_min + n as f64 {
            continue;
        }
        let k = ((r - r_min).floor() as usize).min(n - 1);
        if !(max[k].1 >= v) {
            max[k] = (r, v);
        }
    }
    let mut points = Vec::with_capacity(n);
    for (k, &(at, m)) in max.iter().enumerate() {
        if m.is_nan() {
            return Err(Error::InvalidParameter(format!("annulus [{}, {}) is empty", r_min + k as f64, r_min + k as f64 + 1.0)));
        }
        if !(m > 0.0) {
            return Err(Error::InvalidParameter(format!("annulus [{}, {}) has zero maximum", r_min + k as f64, r_min + k as f64 + 1.0)));
        }
        points.push((at, m));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n as f64, ys.iter().sum::<f64>() / n as f64);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    Ok(DecayFit { slope, intercept: my - slope * mx, points })
}

/// Decay exponent of `|Du_b|` against the bond distance over `[R/5, 4R/5]`.
pub fn decay_fit(domain: &LatticeDomain, u: &Displacement) -> Result<DecayFit> {
    let du = crate::forms::difference(domain, u);
    let samples: Vec<(f64, f64)> =
        domain.bonds().iter().enumerate().map(|(i, b)| (b.dist_to_origin(), du[i].abs())).collect();
    let r = domain.radius();
    annulus_fit(&samples, r / 5.0, 4.0 * r / 5.0)
}

/// Outcome of one experiment, serialisable as a JSON row.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub schema_version: u32,
    pub experiment: String,
    pub inputs: serde_json::Value,
    pub initial_energy: f64,
    pub energy: f64,
    pub cores_before: CoreSet,
    pub cores_after: CoreSet,
    pub net_burgers_before: Option<i64>,
    pub net_burgers_after: Option<i64>,
    pub fitted_exponent: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub max_residual: f64,
    pub outcome: String,
}

fn census(state: &EnergyState, u: &Displacement) -> Result<(CoreSet, Option<i64>)> {
    let alpha = state.alpha(u)?;
    let cores = detect_cores_masked(state.domain(), &alpha, &state.cell_mask())?;
    let full_disk = state.reference().bond_mask.iter().all(|&m| m);
    let net = if full_disk { Some(net_burgers(state.domain(), &alpha)?) } else { None };
    Ok((cores, net))
}

fn run_experiment(
    name: &str,
    inputs: serde_json::Value,
    state: &EnergyState,
    u0: &Displacement,
    cfg: &RelaxConfig,
    classify: impl Fn(&CoreSet, &CoreSet) -> String,
) -> Result<(ExperimentRecord, RelaxResult)> {
    let (cores_before, net_before) = census(state, u0)?;
    let res = relax_state(state, u0, cfg)?;
    let (cores_after, net_after) = census(state, &res.u)?;
    let outcome = classify(&cores_before, &cores_after);
    let record = ExperimentRecord {
        schema_version: crate::SCHEMA_VERSION,
        experiment: name.into(),
        inputs,
        initial_energy: res.initial_energy,
        energy: res.energy,
        cores_before,
        cores_after,
        net_burgers_before: net_before,
        net_burgers_after: net_after,
        fitted_exponent: None,
        iterations: res.iterations,
        converged: res.converged,
        max_residual: res.max_residual,
        outcome,
    };
    Ok((record, res))
}

/// Symmetry-breaking perturbations of the single-core relaxation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecayVariant {
    Symmetric,
    /// Homogeneous far-field strain `x -> g . x` added to the reference.
    Shear { g: [f64; 2] },
    /// Reference `yhat(. - centre)` with the core moved off the cell barycentre.
    OffCentre { centre: [f64; 2] },
}

/// Relaxes the single core from `u = 0` and fits the decay of `Du`.
pub fn decay_experiment(cfg: &RelaxConfig, p: PotentialSpec, variant: DecayVariant) -> Result<(ExperimentRecord, RelaxResult)> {
    let domain = cfg.domain()?;
    let reference = match variant {
        DecayVariant::Symmetric => Reference::yhat(&domain),
        DecayVariant::Shear { g } => Reference::yhat(&domain).with_linear(&domain, g),
        DecayVariant::OffCentre { centre } => Reference::yhat_about(&domain, centre),
    };
    let state = EnergyState::new(&domain, p, reference, cfg.active())?;
    let inputs = serde_json::json!({ "radius": cfg.radius, "potential": p, "variant": variant });
    let (mut record, res) = run_experiment("decay", inputs, &state, &Displacement::zeros(&domain), cfg, |_, after| {
        format!("{} cores after relaxation", after.count())
    })?;
    record.fitted_exponent = Some(decay_fit(&domain, &res.u)?.slope);
    Ok((record, res))
}

/// Cells of a dipole `(C, H_1^l C)`, `l` hops apart along `a_1`, centred below the origin.
pub fn dipole_cells(radius: f64, l: usize) -> (Cell, Cell) {
    let plus = locate_cell([-0.25 * l as f64, -0.25 * radius]);
    let mut minus = plus;
    for _ in 0..l {
        minus = minus.hop(Dir::new(0));
    }
    (plus, minus)
}

/// Relaxes the necessary core at C0 together with a dipole at separation `l` and
/// reports whether the dipole persists or annihilates.
pub fn dipole_experiment(l: usize, cfg: &RelaxConfig, p: PotentialSpec) -> Result<(ExperimentRecord, RelaxResult)> {
    let domain = cfg.domain()?;
    if l < 2 || l as f64 > cfg.active() / 2.0 {
        return Err(Error::InvalidParameter(format!("dipole separation {l} outside [2, active radius / 2]")));
    }
    let (plus, minus) = dipole_cells(cfg.radius, l);
    let sup = initial_superpose(&domain, &[(Cell::C0, 1), (plus, 1), (minus, -1)], cfg.active())?;
    let state = EnergyState::new(&domain, p, sup.reference.build(&domain), cfg.active())?;
    let inputs = serde_json::json!({
        "radius": cfg.radius, "potential": p, "separation": l, "positive": plus, "negative": minus,
    });
    run_experiment("dipole", inputs, &state, &sup.u, cfg, |_, after| {
        if after.count() > 1 { "persists" } else { "annihilates" }.to_string()
    })
}

/// Relaxes a core at depth `l` below the surface of the half space `xi_2 <= 0`,
/// clamped on the circular arc, free on the surface.
pub fn halfspace_relax(l: f64, cfg: &RelaxConfig, p: PotentialSpec) -> Result<(ExperimentRecord, RelaxResult)> {
    let domain = cfg.domain()?;
    if !(l > 0.0) || l + 3.0 > cfg.active() {
        return Err(Error::InvalidParameter(format!("depth {l} outside (0, active radius - 3]")));
    }
    let core = locate_cell([0.0, -l]);
    let centre = core.barycentre();
    let reference = Reference::yhat_about(&domain, centre).restricted(&domain, |s| s.position()[1] <= 0.0);
    let state = EnergyState::new(&domain, p, reference, cfg.active())?;
    let inputs = serde_json::json!({
        "radius": cfg.radius, "potential": p, "depth": l, "core": core, "core_depth": -centre[1],
    });
    run_experiment("halfspace", inputs, &state, &Displacement::zeros(&domain), cfg, |_, after| {
        if after.is_empty() { "escapes" } else { "persists" }.to_string()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::psi_lin;

    #[test]
    fn config_validation() {
        assert!(RelaxConfig::default().validate().is_ok());
        assert!(RelaxConfig { tolerance: 0.0, ..Default::default() }.validate().is_err());
        assert!(RelaxConfig { active_radius: Some(29.0), ..Default::default() }.validate().is_err());
    }

    #[test]
    fn single_core_superposition_is_zero() {
        let d = LatticeDomain::new(10.0).unwrap();
        let s = initial_superpose(&d, &[(Cell::C0, 1)], 8.0).unwrap();
        assert_eq!(s.reference, ReferenceKind::Yhat);
        assert!(s.u.max_abs() < 1e-15);
        assert!(initial_superpose(&d, &[(Cell::C0, 1), (Cell::C0, -1)], 8.0).is_err());
    }

    #[test]
    fn zero_budget_returns_input() {
        let cfg = RelaxConfig { radius: 8.0, max_iter: 0, ..Default::default() };
        let d = cfg.domain().unwrap();
        let u0 = Displacement::zeros(&d);
        let r = relax(&d, &u0, &cfg, psi_lin(1.0).unwrap()).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.u, u0);
    }

    #[test]
    fn annulus_fit_recovers_power() {
        let samples: Vec<(f64, f64)> = (0..400).map(|k| 1.0 + 0.1 * k as f64).map(|r| (r, 3.0 * r.powf(-2.5))).collect();
        let f = annulus_fit(&samples, 2.0, 30.0).unwrap();
        assert!((f.slope + 2.5).abs() < 0.05, "{}", f.slope);
        assert!(annulus_fit(&samples, 50.0, 60.0).is_err());
    }
}
