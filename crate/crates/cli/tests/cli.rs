use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use wavecompact::experiments::ConvergenceRow;
use wavecompact::oracle::DiscreteHarmonic;
use wavecompact::reference::HarmonicReference;
use wavecompact::scheme::{error_report, Diagnostics};
use wavecompact::{ErrorMode, ErrorReport, HarmonicDataKind, MeshSpec, SchemeRun, U1Variant, V0Mode};

fn run_cli(dir: &Path, sub: &str, config: &str, extra: &[&str]) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_wavecompact"))
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .env_remove("WAVECOMPACT_JOBS")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn unstable_mesh_exits_2_without_files() {
    let dir = TempDir::new().unwrap();
    let o = run_cli(
        dir.path(),
        "solve",
        r#"{"kind": "solve", "mesh": {"X": 1, "T": 1, "N": 10, "M": 10, "a": 1}, "data": {"u0": "zero", "u1": "zero"}}"#,
        &[],
    );
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unstable mesh"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unstable_rung_anywhere_in_ladder_exits_2() {
    let dir = TempDir::new().unwrap();
    let o = run_cli(
        dir.path(),
        "converge",
        r#"{"mesh": {"ladder": [[8, 16], [16, 32], [32, 32]]}, "data": {"preset": "manufactured"}}"#,
        &[],
    );
    assert_eq!(code(&o), 2);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn configuration_errors_exit_3() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run_cli(dir.path(), "solve", "{ not json", &[])), 3);
    assert_eq!(code(&run_cli(dir.path(), "solve", r#"{"kind": "converge", "mesh": {"N": 8}}"#, &[])), 3);
    assert_eq!(code(&run_cli(dir.path(), "solve", r#"{"mesh": {"N": 8}, "unknown_key": 1}"#, &[])), 3);
    // Resonant forced harmonic is rejected before any run.
    let o = run_cli(
        dir.path(),
        "oracle-check",
        r#"{"mesh": {"N": 16, "M": 64}, "data": {"harmonic": {"j": 2, "k": 1}}}"#,
        &[],
    );
    assert_eq!(code(&o), 3);
    assert!(!dir.path().join("out").exists());
    assert_eq!(code(&run_cli(dir.path(), "solve", r#"{"mesh": {"N": 8}, "data": {"preset": "manufactured"}}"#, &["--jobs", "0"])), 3);
}

#[test]
fn zero_data_gives_zero_trajectory_and_errors() {
    let dir = TempDir::new().unwrap();
    let o = run_cli(dir.path(), "solve", r#"{"mesh": {"N": 8, "M": 16}, "data": {"u0": "zero", "u1": "zero"}}"#, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("out/trajectory.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), vec!["m", "t", "i", "x", "v"]);
    let mut rows = 0;
    for rec in rdr.records() {
        assert_eq!(rec.unwrap()[4].parse::<f64>().unwrap(), 0.0);
        rows += 1;
    }
    assert_eq!(rows, 17 * 9);
    let rep: ErrorReport = serde_json::from_str(&fs::read_to_string(dir.path().join("out/error_report.json")).unwrap()).unwrap();
    assert_eq!(rep.max_energy_error, 0.0);
    assert_eq!(rep.l1_spacetime_error, 0.0);
    assert_eq!(rep.max_dx_error, 0.0);
}

#[test]
fn solve_matches_oracle_golden_report() {
    let dir = TempDir::new().unwrap();
    let o = run_cli(
        dir.path(),
        "solve",
        r#"{"mesh": {"N": 32, "M": 128}, "data": {"harmonic": {"j": 1, "k": 1}}, "variant": "v2", "decimate": 16}"#,
        &[],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let got: ErrorReport = serde_json::from_str(&fs::read_to_string(dir.path().join("out/error_report.json")).unwrap()).unwrap();

    // Golden report from the closed-form discrete solution.
    let mesh = MeshSpec::build(PI, PI, 32, 128, 1.0, 1.0).unwrap();
    let kind = HarmonicDataKind::new(1, 1).unwrap();
    let oracle = DiscreteHarmonic::new(kind, &mesh, U1Variant::V2).unwrap();
    let run = SchemeRun {
        mesh: mesh,
        variant: U1Variant::V2,
        v0_mode: V0Mode::NodeSamples,
        trajectory: oracle.trajectory(),
        diagnostics: Diagnostics::default(),
    };
    let golden = error_report(&run, &HarmonicReference::new(kind, &mesh).unwrap(), ErrorMode::NodeSampled).unwrap();
    for (a, b) in [
        (got.max_energy_error, golden.max_energy_error),
        (got.max_dx_error, golden.max_dx_error),
        (got.l1_spacetime_error, golden.l1_spacetime_error),
        (got.l1_spacetime_dx_error, golden.l1_spacetime_dx_error),
    ] {
        // Stepper and closed form agree to rounding, so compare on the solution scale.
        assert!((a - b).abs() <= 1e-9 * b + 1e-12, "{a} vs {b}");
    }
    // Decimated output keeps every 16th level and the last.
    let levels: std::collections::BTreeSet<usize> = csv::Reader::from_path(dir.path().join("out/trajectory.csv"))
        .unwrap()
        .records()
        .map(|r| r.unwrap()[0].parse().unwrap())
        .collect();
    assert_eq!(levels.into_iter().collect::<Vec<_>>(), (0..=8).map(|i| 16 * i).collect::<Vec<_>>());
}

#[test]
fn converge_writes_fixed_schema() {
    let dir = TempDir::new().unwrap();
    let o = run_cli(dir.path(), "converge", r#"{"kind": "converge", "mesh": {"N": 8, "refinements": 3}, "data": {"preset": "manufactured"}}"#, &["--jobs", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let path = dir.path().join("out/converge.csv");
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("N,M,h,tau,err_energy,err_dx,err_l1,order_energy\n"));
    let rows: Vec<ConvergenceRow> = csv::Reader::from_path(&path).unwrap().deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    for w in rows.windows(2) {
        assert_eq!(w[0].h / w[1].h, 2.0);
    }
    assert!(rows[0].order_energy.is_none());
    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["kind"], "converge");
    assert!(summary["version"].is_string());
    assert!(summary["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(summary["config"]["mesh"]["N"], 8);
    let order = summary["result"]["fits"][0]["fit"]["slope"].as_f64().unwrap();
    assert!((order - 4.0).abs() < 0.3, "{order}");
}

#[test]
fn oracle_check_reports_every_variant() {
    let dir = TempDir::new().unwrap();
    let o = run_cli(
        dir.path(),
        "oracle-check",
        r#"{"mesh": {"N": 16, "M": 64}, "data": {"harmonic": {"j": 1, "k": 3}}, "variants": ["v0", "v1", "v2"]}"#,
        &[],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("out/oracle_check.csv")).unwrap();
    let recs: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(recs.len(), 3);
    assert!(recs.iter().all(|r| &r[5] == "true"));
    let o = run_cli(dir.path(), "oracle-check", r#"{"mesh": {"N": 16, "M": 64}, "data": {"harmonic": {"j": 2, "k": 2}}}"#, &[]);
    assert_eq!(code(&o), 0);
}

#[test]
fn sharpness_on_coarse_mesh_exits_2() {
    let dir = TempDir::new().unwrap();
    let o = run_cli(dir.path(), "sharpness", r#"{"mesh": {"N": 8, "M": 16}, "j": 0, "alpha": 2}"#, &[]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("mesh too coarse"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn sharpness_table() {
    let dir = TempDir::new().unwrap();
    let o = run_cli(dir.path(), "sharpness", r#"{"mesh": {"N": 128, "refinements": 1}, "j": 2, "alpha": 2}"#, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("out/sharpness.csv")).unwrap();
    assert!(text.starts_with("N,k_h,measured,predicted,ratio\n"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn stability_probe_with_env_jobs() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(&cfg, r#"{"mesh": {"N": 16}, "samples": 4, "pairs": 10}"#).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_wavecompact"))
        .args(["stability-probe", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .env("WAVECOMPACT_JOBS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("out/stability_probe.csv").exists());
    assert!(dir.path().join("out/lower_bounds.csv").exists());
}
