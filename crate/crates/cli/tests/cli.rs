use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(dir: &Path, args: &[&str], config: &str) -> Output {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_infmodel"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json_number(text: &str, key: &str) -> f64 {
    let v: serde_json::Value = serde_json::from_str(text).unwrap();
    v[key].as_f64().unwrap_or_else(|| panic!("no number under {key}"))
}

#[test]
fn stationary_writes_solution_and_profiles() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["stationary"], "[model]\npreset = \"quadratic\"\n[solver]\neps = 0.05\n");
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    let sol = fs::read_to_string(out.join("solution.json")).unwrap();
    let lambda = json_number(&sol, "lambda");
    assert!((0.9..=1.1).contains(&lambda));
    for key in ["eps", "gamma", "iterations", "residual"] {
        json_number(&sol, key);
    }
    for name in ["U.csv", "F.csv"] {
        let text = fs::read_to_string(out.join(name)).unwrap();
        assert_eq!(text.lines().next().unwrap(), "z,value,d1,d2");
    }
}

#[test]
fn large_eps_fails_with_the_cap_message() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["stationary"], "[model]\npreset = \"quadratic\"\n[solver]\neps = 0.9\n");
    assert!(!o.status.success());
    assert!(stderr(&o).contains("epsilon above contraction threshold"));
}

#[test]
fn missing_model_names_the_key() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["stationary"], "[model]\nminimum = 0\n");
    assert!(!o.status.success());
    assert!(stderr(&o).contains("model.preset"));
}

#[test]
fn verify_passes_by_default_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = "[model]\npreset = \"cubic_perturbed\"\n";
    let a = run(dir.path(), &["verify"], cfg);
    let b = run(dir.path(), &["verify"], cfg);
    assert!(a.status.success(), "{}", stdout(&a));
    assert!(!stdout(&a).contains("FAIL"));
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn verify_catches_a_coarse_rule() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["verify"], "[model]\npreset = \"quadratic\"\n[discretization]\nquad_order = 2\n");
    assert!(!o.status.success());
    assert!(stdout(&o).lines().any(|l| l.starts_with("FAIL quadrature")));
}

#[test]
fn march_rejects_a_large_step() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["march"], "[model]\npreset = \"double_well\"\n[march]\ndt = 0.5\n");
    assert!(!o.status.success());
    assert!(stderr(&o).contains("dt_max"));
}

#[test]
fn march_single_init_reaches_a_certified_equilibrium() {
    let dir = TempDir::new().unwrap();
    let o = run(
        dir.path(),
        &["march"],
        "[model]\npreset = \"quadratic\"\n[discretization]\ndensity_samples = 1024\n[march]\ninits = [0.3]\n",
    );
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    let out = dir.path().join("out");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("march.json")).unwrap()).unwrap();
    assert!(summary["runs"][0]["certificate"].as_f64().unwrap() < 1e-5);
    let trace = fs::read_to_string(out.join("march_0_trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "t,lambda_hat,increment");
    assert!(out.join("march_0_profile.csv").exists());
}

#[test]
fn march_double_well_finds_two_equilibria() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["march"], "[model]\npreset = \"double_well\"\n");
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    let out = dir.path().join("out");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("march.json")).unwrap()).unwrap();
    assert!(summary["distances"][0]["l1"].as_f64().unwrap() >= 0.5);
    assert!(out.join("march_1_profile.csv").exists());
}

#[test]
fn converge_writes_table_and_footer() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["converge"], "[model]\npreset = \"cubic_perturbed\"\n[sweep]\neps = [0.1, 0.05]\n");
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("out/converge.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("eps,err_U0,err_dU0,err_d2U0,err_lambda,err_gamma"));
    assert!(lines.iter().any(|l| l.starts_with("slope,")));
    assert_eq!(*lines.last().unwrap(), "pass,true");
}

#[test]
fn converge_with_one_eps_has_no_slopes() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["converge"], "[model]\npreset = \"quadratic\"\n[sweep]\neps = [0.1]\n");
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("out/converge.csv")).unwrap();
    let slope = text.lines().find(|l| l.starts_with("slope")).unwrap();
    assert_eq!(slope, "slope,,,,,");
}
