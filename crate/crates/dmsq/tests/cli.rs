use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dmsq"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin()
        .args(args)
        .env_remove("DMSQ_THREADS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

fn simulate_json(cfg: &Path, sets: &[&str]) -> (i32, Value) {
    let mut args = vec![
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--format",
        "json",
    ];
    for s in sets {
        args.extend(["--set", s]);
    }
    let o = run(&args);
    (o.status.code().unwrap(), json(&o))
}

fn mode<'a>(v: &'a Value, name: &str) -> &'a Value {
    v["modes"]
        .as_array()
        .unwrap()
        .iter()
        .find(|m| m["mode"] == name)
        .unwrap()
}

#[test]
fn broken_dark_mode_squeezes_b1() {
    let (code, v) = simulate_json(&config("two_mode.toml"), &[]);
    assert_eq!(code, 0);
    assert_eq!(v["stable"], true);
    assert!(mode(&v, "b1")["S_Y"].as_f64().unwrap() > 0.0);
    let o = run(&[
        "simulate",
        "--config",
        config("two_mode.toml").to_str().unwrap(),
    ]);
    assert!(stdout(&o).contains("dark modes: none"));
}

#[test]
fn zero_hopping_phase_leaves_a_dark_mode() {
    let cfg = config("two_mode.toml");
    let (code, v) = simulate_json(&cfg, &["hopping[0].phase=0"]);
    assert_eq!(code, 0);
    assert!(mode(&v, "b1")["S_Y"].as_f64().unwrap() <= 0.0);
    let o = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "hopping[0].phase=0",
    ]);
    assert!(stdout(&o).contains("dark modes: B1"));
}

#[test]
fn json_and_toml_configs_agree() {
    let (_, a) = simulate_json(&config("two_mode.toml"), &[]);
    let (_, b) = simulate_json(&config("two_mode.json"), &[]);
    assert_eq!(a, b);
}

#[test]
fn unstable_steady_state_exits_2() {
    let (code, v) = simulate_json(&config("two_mode.toml"), &["coupling=0", "opa_gain=0.6"]);
    assert_eq!(code, 2);
    assert_eq!(v["stable"], false);
}

#[test]
fn override_matches_edited_file() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("two_mode.toml")).unwrap();
    let edited = dir.path().join("edited.toml");
    fs::write(&edited, text.replace("opa_gain = 0.45", "opa_gain = 0.3")).unwrap();
    let a = run(&[
        "simulate",
        "--config",
        edited.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    let b = run(&[
        "simulate",
        "--config",
        config("two_mode.toml").to_str().unwrap(),
        "--set",
        "opa_gain=0.3",
        "--format",
        "csv",
    ]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn parse_errors_report_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[cavity]\nkappa = = 1\n").unwrap();
    let o = run(&["simulate", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn validation_errors_name_the_field() {
    let o = run(&[
        "simulate",
        "--config",
        config("two_mode.toml").to_str().unwrap(),
        "--set",
        "kappa=-1",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("kappa"), "{}", stderr(&o));
}

#[test]
fn unknown_override_path_is_an_input_error() {
    let o = run(&[
        "simulate",
        "--config",
        config("two_mode.toml").to_str().unwrap(),
        "--set",
        "bogus=1",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_config_is_an_input_error() {
    let o = run(&["simulate", "--config", "/nonexistent/dmsq.toml"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_figure_is_an_input_error() {
    let o = run(&["figure", "fig9"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("fig9"));
}

#[test]
fn fig2a_csv_has_the_known_value() {
    let o = run(&["figure", "fig2a", "--quiet"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("opa_gain,stable,S_X_a"));
    let row = lines.find(|l| l.starts_with("0.45,")).unwrap();
    let s_x: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    assert!((s_x - 2.78753600953).abs() < 1e-9, "{row}");
}

#[test]
fn fig5_summary_reports_threshold_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["figure", "fig5a", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let err = stderr(&o);
    assert!(err.contains("ratio"), "{err}");
    assert!(dir.path().join("fig5a-dmu.csv").exists());
    assert!(dir.path().join("fig5a-dmb.csv").exists());
}

#[test]
fn figure_json_parses() {
    let o = run(&["figure", "fig2b", "--format", "json", "--quiet"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["rows"].as_array().unwrap().len(), 101);
    assert_eq!(v["metadata"]["preset"], "fig2b");
}

#[test]
fn sweep_uses_config_section() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("phase.csv");
    let o = run(&[
        "sweep",
        "--config",
        config("phase_sweep.toml").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(out).unwrap();
    assert_eq!(text.lines().count(), 102);
    assert!(text.starts_with("hopping[0].phase,stable,S_X_b1,"));
}

#[test]
fn sweep_without_section_is_an_input_error() {
    let o = run(&[
        "sweep",
        "--config",
        config("two_mode.toml").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn stability_margin_of_a_passive_system() {
    let o = run(&[
        "stability",
        "--config",
        config("two_mode.toml").to_str().unwrap(),
        "--set",
        "coupling=0",
        "--set",
        "opa_gain=0",
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["stable"], true);
    assert!((v["margin"].as_f64().unwrap() + 1e-5).abs() < 1e-12);
}

#[test]
fn normal_modes_of_two_mode_system() {
    let o = run(&[
        "normal-modes",
        "--config",
        config("two_mode.toml").to_str().unwrap(),
        "--set",
        "hopping[0].phase=0",
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let abs: Vec<f64> = v["modes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["coupling_abs"].as_f64().unwrap())
        .collect();
    assert_eq!(abs.len(), 2);
    assert!(abs.iter().any(|g| *g < 1e-12));
    assert!(abs.iter().any(|g| (g - 0.1 * 2f64.sqrt()).abs() < 1e-12));
    assert_eq!(v["dark_modes"].as_array().unwrap().len(), 1);
}

#[test]
fn uncoupled_chain_has_three_dark_modes() {
    let o = run(&[
        "normal-modes",
        "--config",
        config("chain4.toml").to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["dark_modes"].as_array().unwrap().len(), 3);
}

#[test]
fn help_exits_zero() {
    let o = run(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("simulate"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["simulate"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}
