use std::path::Path;

use integrable_core::scattering::Potential;

use super::{dispatch, run};

struct Output {
    code: i32,
    error: String,
}

/// Runs the command line in process with `--out` appended.
fn integrable(args: &[&str], out: &Path) -> Output {
    let argv = std::iter::once("integrable").chain(args.iter().copied()).chain(["--out", out.to_str().unwrap()]).map(String::from).collect();
    match dispatch(argv) {
        Ok(code) => Output { code, error: String::new() },
        Err(e) => Output { code: e.exit_code(), error: e.to_string() },
    }
}

fn stderr(o: &Output) -> String {
    o.error.clone()
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(integrable(&["verify", "form", "--trials", "20"], out).code, 0);
    // The bracket suite carries an as-written check that fails.
    assert_eq!(integrable(&["verify", "bracket", "--trials", "5"], out).code, 1);
    for bad in [
        &["verify", "form", "--n", "1"][..],
        &["verify", "form", "--trials", "0"],
        &["verify", "form", "--tol-form", "-1"],
        &["verify", "form", "--tol-nonsense", "1"],
        &["verify", "form", "--grid-xi-count=2"],
        &["verify", "nonsense"],
        &["darboux", "/nonexistent/matrix.json"],
        &["frobnicate"],
    ] {
        let o = integrable(bad, out);
        assert_eq!(o.code, 2, "{bad:?}: {}", stderr(&o));
    }
}

#[test]
fn reports_and_trial_tables_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let o = integrable(&["verify", "flows", "--trials", "4"], dir.path());
    assert_eq!(o.code, 1);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("flows_report.json")).unwrap()).unwrap();
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.iter().any(|c| c["kind"] == "as-written" && c["pass"] == false));
    assert!(checks.iter().all(|c| c["kind"] == "as-written" || c["pass"] == true));
    let csv = std::fs::read_to_string(dir.path().join("flows_trials.csv")).unwrap();
    assert!(csv.starts_with("trial,linear_flow_momentum_drift,linear_flow_angle_rate_as_written,linear_flow_angle_rate_corrected"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn identical_seeds_give_identical_csv_bytes() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for (dir, seed) in [(&a, "5"), (&b, "5"), (&c, "6")] {
        integrable(&["verify", "form", "--trials", "10", "--seed", seed], dir.path());
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("form_trials.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# coarse run\nseed = 9\ntrials = 3\ntol.form = 1e-30\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    // tol.form = 1e-30 is unattainable; the flag restores it.
    assert_eq!(integrable(&["verify", "form", "--config", cfg], dir.path()).code, 1);
    assert_eq!(integrable(&["verify", "form", "--config", cfg, "--tol-form", "1e-8"], dir.path()).code, 0);
    let report = std::fs::read_to_string(dir.path().join("form_report.json")).unwrap();
    assert!(report.contains("\"seed\": 9") && report.contains("\"trials\": 3"));

    let broken = dir.path().join("broken.cfg");
    std::fs::write(&broken, "seed = 1\nthis line has no equals sign\n").unwrap();
    let o = integrable(&["verify", "form", "--config", broken.to_str().unwrap()], dir.path());
    assert_eq!(o.code, 2);
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn output_directory_defaults_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    // The only test that reads the variable.
    std::env::set_var(crate::config::OUT_DIR_ENV, dir.path());
    let argv = ["integrable", "verify", "casimir", "--trials", "2"].map(String::from).to_vec();
    assert_eq!(run(argv), 0);
    assert!(dir.path().join("casimir_report.json").exists());
}

#[test]
fn zero_potential_scatters_to_identity() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("zero.json");
    let q = Potential::zero(3, 2.0, 1.0 / 16.0).unwrap();
    std::fs::write(&file, q.to_json_value().to_string()).unwrap();
    let o = integrable(&["scatter", "--potential", file.to_str().unwrap(), "--grid-xi-count", "9"], dir.path());
    assert_eq!(o.code, 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("scatter_summary.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 9);
    for row in rows {
        for (name, v) in header.iter().zip(row) {
            if *name != "xi" {
                assert!(v.abs() < 1e-12, "{name} = {v}");
            }
        }
    }
}

#[test]
fn malformed_potential_reports_line_context() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.json");
    std::fs::write(&file, "{\n  \"n\": 3,\n  \"x0\": oops\n}\n").unwrap();
    let o = integrable(&["scatter", "--potential", file.to_str().unwrap()], dir.path());
    assert_eq!(o.code, 2);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn demo_flow_keeps_momenta_and_doubles_the_angle_rate() {
    let dir = tempfile::tempdir().unwrap();
    let o = integrable(&["scatter", "--demo", "--flow-k", "1", "--flow-t", "0.5", "--grid-xi-count", "17"], dir.path());
    assert_eq!(o.code, 0, "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("scatter_invariance.json")).unwrap()).unwrap();
    assert!(r["p_drift"].as_f64().unwrap() <= 1e-8);
    assert!(r["q_slope_residual"].as_f64().unwrap() <= 1e-6);
    assert!(r["q_slope_residual_as_written"].as_f64().unwrap() > 1e-3);
    assert!(r["hamiltonian_drift"].as_f64().unwrap() <= 1e-8);
    assert!(dir.path().join("three_wave_potential.json").exists());
}

#[test]
fn darboux_subcommand_writes_the_chart() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("a.json");
    std::fs::write(&file, r#"{"n": 2, "re": [2, 1, 1, 1], "im": [0, 0, 0, 0]}"#).unwrap();
    let o = integrable(&["darboux", file.to_str().unwrap()], dir.path());
    assert_eq!(o.code, 0, "{}", stderr(&o));
    let chart: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("darboux_chart.json")).unwrap()).unwrap();
    assert_eq!(chart["n"], 2);
    assert_eq!(chart["p_re"].as_array().unwrap().len(), 1);
}
