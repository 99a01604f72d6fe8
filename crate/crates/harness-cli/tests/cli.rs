use std::path::Path;
use std::process::{Command, Output};

use harness_cli::{RunReport, CSV_HEADER, SWEEP_HEADER};

fn harness(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_harness")).args(args).arg("--out").arg(out).output().unwrap()
}

#[test]
fn run_writes_csv_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(
        &cfg,
        "# noiseless least squares\ntestbed = linreg\noptimizer = adagradnorm\nn = 200 # samples\nd = 10\nb0 = 10\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = harness(&["run", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some(CSV_HEADER));
    // linreg leaves the last three columns empty
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",,,")));
    let report = RunReport::from_json(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report.flags.converged);
    assert_eq!(csv.lines().count(), report.final_state.iterations + 2);
    let t = report.bounds.iter().find(|b| b.name == "T_total").unwrap();
    assert!(t.computed >= report.final_state.iterations as f64);
    assert!(report.all_pass());
}

#[test]
fn divergence_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = harness(
        &["run", "--testbed", "linreg", "--optimizer", "sgd-const", "--b0", "1e-3", "--n", "100", "--d", "5"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    let report = RunReport::from_json(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert!(report.flags.diverged);
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = harness(&["run", "--testbed", "linreg", "--optimizer", "adaloss", "--d", "5"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`n`"));
    let o = harness(&["run", "--testbed", "linreg", "--optimizer", "adaloss", "--n", "9", "--d", "3", "--eta", "-1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("eta"));
    let o = harness(&["run", "--config", "/nonexistent/exp.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/exp.cfg"));
    let o = Command::new(env!("CARGO_BIN_EXE_harness")).args(["run", "--bogus"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = Command::new(env!("CARGO_BIN_EXE_harness")).arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn sweep_writes_grid_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = harness(
        &[
            "sweep", "--testbed", "linreg", "--optimizer", "adaloss,sgd-const", "--n", "100", "--d", "5", "--mode", "stoch",
            "--steps", "300", "--tol", "1e-300", "--b0-grid", "1e-3,1e-2,...,1e3", "--jobs", "2",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], SWEEP_HEADER);
    assert_eq!(lines.len(), 15);
    assert!(lines.iter().all(|l| l.split(',').count() == 6));
    assert!(lines[2].starts_with("0.001,sgd-const,diverged"));
    assert_eq!(std::fs::read_dir(dir.path().join("sweep")).unwrap().count(), 14);
}

#[test]
fn gen_verify_and_gram_write_json() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--testbed", "twolayer", "--optimizer", "adaloss", "--n", "12", "--d", "4", "--m", "60"];
    for cmd in ["gen", "verify", "gram"] {
        let mut all = vec![cmd];
        all.extend(args);
        let o = harness(&all, dir.path());
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let gram: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("gram.json")).unwrap()).unwrap();
    assert_eq!(gram["h_inf_eigenvalues"].as_array().unwrap().len(), 12);
    let problem: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("problem.json")).unwrap()).unwrap();
    assert_eq!(problem["w0"].as_array().unwrap().len(), 60);
    let verify: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert!(verify["bounds"].as_array().unwrap().iter().any(|b| b["name"] == "T0"));
}

#[test]
fn plot_series_written_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(&cfg, "testbed = twolayer\noptimizer = adaloss\nn = 10\nd = 4\nm = 50\nsteps = 20\nplot = true\n").unwrap();
    let o = harness(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let series = std::fs::read_to_string(dir.path().join("trajectory_lambda_max_H.dat")).unwrap();
    // eigenvalues every 10 steps: rows 0, 10, 20
    assert_eq!(series.lines().count(), 3);
}
