use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mfc::config::Preset;

fn mfc(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfc"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn analyze_preset_reports_p_and_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let out = mfc(&["analyze", "--preset", "scenario1"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let a = json(&dir.path().join("analysis.json"));
    let p: Vec<Vec<f64>> = serde_json::from_value(a["p"].clone()).unwrap();
    let expected = [[1.125, 0.125], [0.125, 0.15625]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((p[i][j] - expected[i][j]).abs() < 1e-12);
        }
    }
    let g = |k: &str| a["gamma"][k].as_f64().unwrap();
    assert!((g("mfc") - 24.93).abs() < 0.01);
    assert!((g("sl") - 2.499).abs() < 1e-3);
    assert!((g("slhg") - 24.99).abs() < 0.01);
}

#[test]
fn serialized_preset_gives_identical_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario1.json");
    fs::write(&cfg, Preset::Scenario1.config().to_json().unwrap()).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(mfc(&["analyze", "--preset", "scenario1"], &a).status.success());
    assert!(mfc(&["analyze", "--config", cfg.to_str().unwrap()], &b).status.success());
    let read = |d: &Path| fs::read(d.join("analysis.json")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn empty_controller_set_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = Preset::Scenario1.config();
    cfg.controllers.clear();
    let path = dir.path().join("bad.json");
    fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = mfc(&["simulate", "--config", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("controllers"));
    assert!(!dir.path().join("simulation.json").exists());
}

#[test]
fn missing_config_and_bad_override_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mfc(&["analyze"], dir.path()).status.code(), Some(1));
    let out = mfc(&["simulate", "--preset", "scenario1", "--step", "-0.1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("step"));
}

#[test]
fn roa_and_simulate_write_plot_ready_csv() {
    let dir = tempfile::tempdir().unwrap();
    assert!(mfc(&["roa", "--preset", "scenario1"], dir.path()).status.success());
    let boundaries = fs::read_to_string(dir.path().join("roa_boundaries.csv")).unwrap();
    assert_eq!(boundaries.lines().next(), Some("kind,x1,x2"));
    for kind in ["MFC1", "MFC2", "SL", "SLHG", "MFC2_SWEEP", "MFC2_ENVELOPE"] {
        assert!(boundaries.lines().any(|l| l.starts_with(&format!("{kind},"))), "{kind}");
    }
    let roa = json(&dir.path().join("roa.json"));
    assert_eq!(roa["estimates"].as_array().unwrap().len(), 4);

    let out = mfc(&["simulate", "--preset", "scenario1", "--horizon", "1"], dir.path());
    assert!(out.status.success());
    let traj = fs::read_to_string(dir.path().join("trajectory_mfc.csv")).unwrap();
    assert_eq!(traj.lines().next(), Some("t,x1,x2,xstar1,xstar2,u,V"));
    assert_eq!(traj.lines().count(), 1002);
    let sim = json(&dir.path().join("simulation.json"));
    let u0 = sim["runs"][1]["metrics"]["u0"].as_f64().unwrap();
    assert!((u0 - 309.81).abs() < 1e-9);
}

#[test]
fn steady_state_and_falsify_outputs() {
    let dir = tempfile::tempdir().unwrap();
    assert!(mfc(&["steady-state", "--preset", "scenario1"], dir.path()).status.success());
    let ss = json(&dir.path().join("steady_state.json"));
    assert_eq!(ss["sl"]["roots"].as_array().unwrap().len(), 3);
    let loss = ss["sl_multiplicity_loss"].as_f64().unwrap();
    assert!((loss - 1.95).abs() < 0.05);
    let sweep = fs::read_to_string(dir.path().join("steady_state_sweep.csv")).unwrap();
    assert!(sweep.starts_with("loop,y_d,root1,root2,root3"));

    let out = mfc(&["falsify", "--preset", "scenario2", "--samples", "8", "--seed", "3"], dir.path());
    assert!(out.status.success());
    let f = json(&dir.path().join("falsify.json"));
    assert_eq!(f["reports"].as_array().unwrap().len(), 3);
    assert!(f["skipped"]["SL"].is_string());
    let viol = fs::read_to_string(dir.path().join("violations.csv")).unwrap();
    assert_eq!(viol.lines().count(), 1);
}

#[test]
fn reproduce_mismatch_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("tight.json");
    fs::write(&profile, r#"{"u_slhg0": {"kind": "relative", "tolerance": 1e-6}}"#).unwrap();
    let out = mfc(
        &["reproduce", "scenario1", "--samples", "4", "--tolerance-profile", profile.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&dir.path().join("summary.json"));
    assert_eq!(summary["mismatches"].as_u64(), Some(1));

    let bad = dir.path().join("unknown.json");
    fs::write(&bad, r#"{"no_such_row": {"kind": "flag"}}"#).unwrap();
    let out = mfc(&["reproduce", "scenario1", "--tolerance-profile", bad.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn reproduce_scenario_one_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = mfc(&["reproduce", "scenario1", "--samples", "20"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let summary = json(&dir.path().join("summary.json"));
    let names: Vec<&str> = summary["rows"].as_array().unwrap().iter().map(|r| r["name"].as_str().unwrap()).collect();
    for n in ["c_sl", "c_slhg", "c_star", "c_tilde", "sl_error_pct", "u_slhg0"] {
        assert!(names.contains(&n), "{n}");
    }
}
