use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glsysid")).args(args).output().expect("spawn CLI")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SWEEP: &str = r#"
kind = "rate_sweep"
dims = [2]
n_grid = [256, 1024]
trials = 3

[link]
kind = "relu"

[theta_gen]
kind = "spectral"
scale = 0.6

[fit]
iterations = 100
"#;

#[test]
fn missing_theta_gen_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &SWEEP.replace("[theta_gen]\nkind = \"spectral\"\nscale = 0.6\n", ""));
    let out = cli(&["rate-sweep", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("theta_gen"));
}

#[test]
fn unknown_key_and_wrong_kind_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &format!("{SWEEP}\nturbo = true\n"));
    assert_eq!(cli(&["rate-sweep", "--config", &cfg]).status.code(), Some(1));
    let cfg = write(dir.path(), "d.toml", SWEEP);
    assert_eq!(cli(&["isometry", "--config", &cfg]).status.code(), Some(1));
    assert_eq!(cli(&["rate-sweep", "--config", "/nonexistent.toml"]).status.code(), Some(1));
}

#[test]
fn violated_assertion_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &format!("{SWEEP}\n[assert]\nparam_slope_max = -5.0\n"));
    let out_path = dir.path().join("sweep.csv");
    let out = cli(&["rate-sweep", "--config", &cfg, "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    // results are still written before the verdict
    assert!(out_path.exists());
}

#[test]
fn sweep_writes_table_slopes_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SWEEP);
    let out_path = dir.path().join("sweep.csv");
    let out = cli(&["rate-sweep", "--config", &cfg, "--seed", "3", "--out", out_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(&out_path).unwrap();
    let mut lines = table.lines();
    assert_eq!(
        lines.next().unwrap(),
        "d,n,seed,trial,link_kind,regime,rho,R,param_err_sq,pred_err,ols_err_sq,iterations,eta,chosen_iterate,wall_time_seconds"
    );
    assert_eq!(lines.count(), 6);
    assert!(dir.path().join("sweep.csv.slopes.csv").exists());
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sweep.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 3);
    assert_eq!(meta["command"], "rate-sweep");
    assert_eq!(meta["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn seed_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SWEEP);
    let a = cli(&["rate-sweep", "--config", &cfg, "--seed", "1"]);
    let b = cli(&["rate-sweep", "--config", &cfg, "--seed", "2"]);
    let c = cli(&["rate-sweep", "--config", &cfg, "--seed", "1"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, c.stdout);
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn noiseless_single_fit_of_zero_system_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        r#"
kind = "single_fit"
dims = [3]
n_grid = [100]

[theta_gen]
kind = "zero"

[noise]
kind = "zero"

[fit]
iterations = 50
"#,
    );
    let out = cli(&["fit", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["estimate"]["param_err_sq"].as_f64().unwrap() <= 1e-12);
    assert!(report["ols_err_sq"].is_null());
}

#[test]
fn certify_reports_inconclusive_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        r#"
dims = [2]

[theta_gen]
kind = "explicit"
matrix = [[1.0, 1.0], [-1.0, -1.0]]
"#,
    );
    let out = cli(&["certify", "--config", &cfg]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("2,0,inconclusive,"), "{text}");
}
