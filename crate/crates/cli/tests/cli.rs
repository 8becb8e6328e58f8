use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn antiplane(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_antiplane"))
        .current_dir(dir)
        .env_remove("ANTIPLANE_OUTPUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn burgers_of_the_reference_is_one() {
    let tmp = TempDir::new().unwrap();
    let o = antiplane(tmp.path(), &["burgers", "--radius", "20", "-o", "out"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).trim(), "net Burgers vector: 1");
    let doc = json(&tmp.path().join("out/burgers.json"));
    assert_eq!(doc["net_burgers"], 1);
    assert_eq!(doc["schema_version"], 1);
}

#[test]
fn relax_without_iterations_returns_the_initial_state() {
    let tmp = TempDir::new().unwrap();
    let o = antiplane(tmp.path(), &["relax", "--radius", "10", "--max-iter", "0", "-o", "out"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("incomplete"));
    let doc = json(&tmp.path().join("out/relax.json"));
    assert_eq!(doc["converged"], false);
    assert_eq!(doc["iterations"], 0);
    assert_eq!(doc["energy"], 0.0);
    let csv = fs::read_to_string(tmp.path().join("out/displacement.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",0.0000000000000000e0")));
}

#[test]
fn runs_are_deterministic_and_replayable() {
    let tmp = TempDir::new().unwrap();
    let cfg = "[relax]\nradius = 12.0\ntolerance = 1e-9\n\n[potential]\nname = \"cos\"\n";
    fs::write(tmp.path().join("run.toml"), cfg).unwrap();
    for out in ["a", "b"] {
        let o = antiplane(tmp.path(), &["relax", "-c", "run.toml", "-o", out]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let o = antiplane(tmp.path(), &["run", "a/effective_config.toml", "-o", "c"]);
    assert!(o.status.success());
    for f in ["relax.json", "displacement.csv"] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        assert_eq!(a, fs::read(tmp.path().join("b").join(f)).unwrap(), "{f}");
        assert_eq!(a, fs::read(tmp.path().join("c").join(f)).unwrap(), "{f}");
    }
    // The replayed effective config only differs in its output directory.
    let ea = fs::read_to_string(tmp.path().join("a/effective_config.toml")).unwrap();
    let ec = fs::read_to_string(tmp.path().join("c/effective_config.toml")).unwrap();
    assert_eq!(ea.replace("output_dir = \"a\"", "output_dir = \"c\""), ec);
    assert!(ea.contains("subcommand = \"relax\""));
}

#[test]
fn environment_sets_the_output_directory() {
    let tmp = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_antiplane"))
        .current_dir(tmp.path())
        .env("ANTIPLANE_OUTPUT_DIR", "from_env")
        .args(["burgers", "--radius", "10"])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(tmp.path().join("from_env/burgers.json").exists());
}

#[test]
fn error_categories_have_distinct_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let code = |args: &[&str]| antiplane(tmp.path(), args).status.code().unwrap();
    assert_eq!(code(&["frobnicate"]), 2);
    fs::write(tmp.path().join("typo.toml"), "[relax]\nradious = 10.0\n").unwrap();
    assert_eq!(code(&["relax", "-c", "typo.toml"]), 3);
    fs::write(tmp.path().join("bare.toml"), "[relax]\nradius = 10.0\n").unwrap();
    assert_eq!(code(&["run", "bare.toml"]), 3);
    assert_eq!(code(&["relax", "--radius", "2"]), 4);
    let far = "[relax]\nradius = 20.0\n[initial]\ncores = [{ cell = { n = 17, m = 0, orientation = \"Up\" }, sign = 1 }]\n";
    fs::write(tmp.path().join("far.toml"), far).unwrap();
    assert_eq!(code(&["cores", "-c", "far.toml", "-o", "far"]), 5);
}

#[test]
fn print_config_round_trips() {
    let tmp = TempDir::new().unwrap();
    let o = antiplane(tmp.path(), &["decay", "--radius", "15", "--potential", "cos", "--print-config"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let v: toml::Value = toml::from_str(&text).unwrap();
    assert_eq!(v["subcommand"].as_str(), Some("decay"));
    assert_eq!(v["relax"]["radius"].as_float(), Some(15.0));
    assert_eq!(v["potential"]["name"].as_str(), Some("cos"));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn cores_and_cuts_of_a_planted_dipole() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"
[relax]
radius = 20.0

[initial]
cores = [
  { cell = { n = -1, m = -1, orientation = "Down" }, sign = 1 },
  { cell = { n = 3, m = 1, orientation = "Up" }, sign = 1 },
  { cell = { n = -4, m = 2, orientation = "Down" }, sign = -1 },
]
"#;
    fs::write(tmp.path().join("dipole.toml"), cfg).unwrap();
    let o = antiplane(tmp.path(), &["cores", "-c", "dipole.toml", "-o", "out"]);
    assert!(o.status.success());
    let doc = json(&tmp.path().join("out/cores.json"));
    assert_eq!(doc["cores"]["positive"].as_array().unwrap().len(), 2);
    assert_eq!(doc["cores"]["negative"][0]["n"], -4);
    assert_eq!(doc["net_burgers"], 1);
    let o = antiplane(tmp.path(), &["cuts", "-c", "dipole.toml", "-o", "out"]);
    assert!(o.status.success());
    let doc = json(&tmp.path().join("out/cuts.json"));
    let cut = &doc["cuts"][0];
    assert_eq!(doc["length"], cut["length"]);
    assert!(cut["segments"].as_array().unwrap().len() <= 2);
}

#[test]
fn dipole_rows_follow_the_requested_order() {
    let tmp = TempDir::new().unwrap();
    let o = antiplane(tmp.path(), &["dipole", "--radius", "20", "--separation", "3", "--separation", "2", "-o", "out"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Vec<serde_json::Value> = fs::read_to_string(tmp.path().join("out/dipole.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["inputs"]["separation"], 3);
    assert_eq!(rows[1]["inputs"]["separation"], 2);
    assert_eq!(rows[1]["outcome"], "annihilates");
}

#[test]
fn small_audit_prints_table_and_json() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"
[audit]
reference_radius = 20.0
g_grid = 100

[audit.sweep]
configurations = 4
crossing_samples = 20

[audit.cuts_a]
seed = 1
samples = 100

[audit.cuts_b]
seed = 2
samples = 100
"#;
    fs::write(tmp.path().join("audit.toml"), cfg).unwrap();
    let o = antiplane(tmp.path(), &["audit", "-c", "audit.toml", "-o", "out"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("check"));
    assert!(text.contains("\"schema_version\": 1"));
    assert!(text.trim_end().ends_with("all asserted checks pass"));
    let doc = json(&tmp.path().join("out/audit.json"));
    assert!(doc["entries"].as_array().unwrap().iter().any(|e| e["name"] == "core_energy"));
}

#[test]
fn reference_export_has_full_precision() {
    let tmp = TempDir::new().unwrap();
    let o = antiplane(tmp.path(), &["reference", "--radius", "8", "-o", "out"]);
    assert!(o.status.success());
    let forces = fs::read_to_string(tmp.path().join("out/reference_forces.csv")).unwrap();
    let mut lines = forces.lines();
    assert_eq!(lines.next(), Some("n,m,x,y,force"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 5);
    let mantissa = row[4].split('e').next().unwrap().trim_start_matches('-').replace('.', "");
    assert_eq!(mantissa.len(), 17);
    let alpha = fs::read_to_string(tmp.path().join("out/alpha_hat.csv")).unwrap();
    assert_eq!(alpha.lines().next(), Some("tail_n,tail_m,dir_i,value"));
}
