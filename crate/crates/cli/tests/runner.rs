use std::path::Path;
use std::process::Command;

use decprox::analysis::Classification;
use decprox_cli::config::{parse_config_str, StepSize};
use decprox_cli::experiment::{build_instance, resolve_all, run_experiment};
use decprox_cli::libsvm::parse_libsvm;
use decprox_cli::output::TRAJECTORY_HEADER;

fn lasso_config(dir: &Path, iters: usize, record_every: usize) -> String {
    format!(
        r#"{{
            "problem": "lasso_quadratic",
            "graph": {{"kind": "random_connected", "K": 20, "seed": 4, "extra_edge_prob": 0.2}},
            "algorithms": [
                {{"name": "ProxED", "mu": "auto"}},
                {{"name": "ProxATC1", "mu": "auto"}},
                {{"name": "ProxATC2", "mu": "auto"}},
                {{"name": "PGEXTRA", "mu": "auto"}}
            ],
            "lambda": 0.01,
            "rho": 0.01,
            "iters": {iters},
            "record_every": {record_every},
            "output_dir": {dir:?},
            "data": {{"synthetic": {{"samples": 200, "dim": 8}}}},
            "seeds": {{"data": 1, "partition": 2}}
        }}"#
    )
}

#[test]
fn lasso_suite_writes_files_and_converges_linearly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = parse_config_str(&lasso_config(tmp.path(), 600, 1)).unwrap();
    let report = run_experiment(&cfg).unwrap();
    for label in ["ProxED", "ProxATC1", "ProxATC2", "PGEXTRA"] {
        assert!(tmp.path().join(format!("{label}.csv")).exists());
        assert!(tmp.path().join(format!("{label}.meta.json")).exists());
    }
    let summary = std::fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
    let ed = &report.outcomes[0];
    assert_eq!(ed.resolved.label, "ProxED");
    assert_eq!(ed.verdict.classification, Classification::Linear);
    assert!(ed.record.final_error() < 1e-10);
}

#[test]
fn auto_step_is_a_fixed_fraction_of_the_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = parse_config_str(&lasso_config(tmp.path(), 10, 1)).unwrap();
    assert!(cfg.algorithms.iter().all(|a| a.mu == StepSize::Auto));
    let inst = build_instance(&cfg).unwrap();
    for r in resolve_all(&cfg, &inst).unwrap() {
        let rate = r.rate;
        if r.label == "PGEXTRA" {
            assert!(rate.is_none());
            continue;
        }
        let sigma = r.spectral.as_ref().unwrap().sigma_max_c;
        let bound = (2.0 - sigma) / inst.costs.delta();
        assert!((r.mu - 0.9 * bound).abs() <= 1e-12 * bound, "{}", r.label);
        assert!(rate.unwrap().feasible);
    }
}

#[test]
fn row_count_follows_record_interval() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = parse_config_str(&lasso_config(tmp.path(), 95, 10)).unwrap();
    run_experiment(&cfg).unwrap();
    let csv = std::fs::read_to_string(tmp.path().join("ProxED.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(TRAJECTORY_HEADER));
    assert_eq!(lines.count(), 95 / 10 + 1);
    let pg = std::fs::read_to_string(tmp.path().join("PGEXTRA.csv")).unwrap();
    assert!(pg.lines().nth(1).unwrap().ends_with(",,,"));
}

#[test]
fn identical_configs_give_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&parse_config_str(&lasso_config(a.path(), 200, 5)).unwrap()).unwrap();
    run_experiment(&parse_config_str(&lasso_config(b.path(), 200, 5)).unwrap()).unwrap();
    for name in ["ProxED.csv", "ProxATC1.csv", "ProxATC2.csv", "PGEXTRA.csv", "summary.csv", "plot.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs");
    }
}

#[test]
fn communication_rounds_column() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = parse_config_str(&lasso_config(tmp.path(), 20, 5)).unwrap();
    run_experiment(&cfg).unwrap();
    for (label, per) in [("ProxED", 1), ("ProxATC1", 2), ("ProxATC2", 2), ("PGEXTRA", 1)] {
        let csv = std::fs::read_to_string(tmp.path().join(format!("{label}.csv"))).unwrap();
        for line in csv.lines().skip(1) {
            let mut cols = line.split(',');
            let iter: usize = cols.next().unwrap().parse().unwrap();
            let rounds: usize = cols.next().unwrap().parse().unwrap();
            assert_eq!(rounds, per * iter, "{label}");
        }
    }
}

#[test]
fn libsvm_round_trip_gives_unit_rows() {
    let text = "1 1:3 4:4\n-1 2:1 3:-2 5:0.5\n1 5:7\n";
    let d = parse_libsvm(text.as_bytes(), true, (1.0, -1.0), None).unwrap();
    let dense = d.to_dense::<f64>();
    for row in dense.rows() {
        assert!((row.dot(&row).sqrt() - 1.0).abs() <= 1e-12);
    }
}

fn decprox() -> Command {
    Command::new(env!("CARGO_BIN_EXE_decprox"))
}

#[test]
fn binary_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"problem": "logistic_l1", "lambda": -1, "algorithms": [{"name": "ProxED"}]}"#).unwrap();
    let status = decprox().args(["run", bad.to_str().unwrap()]).status().unwrap();
    assert_eq!(status.code(), Some(2));

    let unknown = tmp.path().join("unknown.json");
    std::fs::write(&unknown, r#"{"problem": "logistic_l1", "algorithms": [{"name": "ProxED"}], "speed": 3}"#).unwrap();
    let out = decprox().args(["validate", unknown.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("speed"));

    let diverge = tmp.path().join("diverge.json");
    let out_dir = tmp.path().join("div");
    std::fs::write(
        &diverge,
        format!(
            r#"{{"problem": "lasso_quadratic", "graph": {{"kind": "ring", "K": 4}},
                "algorithms": [{{"name": "ProxED", "mu": 500.0}}, {{"name": "ProxATC1"}}],
                "iters": 200, "output_dir": {out_dir:?},
                "data": {{"synthetic": {{"samples": 40, "dim": 3}}}}}}"#
        ),
    )
    .unwrap();
    let status = decprox().args(["run", diverge.to_str().unwrap()]).status().unwrap();
    assert_eq!(status.code(), Some(3));
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert!(summary.contains("diverged@"));
    assert!(summary.lines().any(|l| l.starts_with("ProxATC1") && l.ends_with("completed")));

    let ok = tmp.path().join("ok.json");
    std::fs::write(&ok, lasso_config(&tmp.path().join("ok"), 10, 1)).unwrap();
    let out = decprox().args(["rates", ok.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 5);
}

#[test]
fn small_counterexample_preset_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = decprox()
        .args(["counterexample", "--M", "10", "--iters", "300", "--output-dir"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for label in ["PGEXTRA", "DLADMM", "ProxED"] {
        let csv = std::fs::read_to_string(tmp.path().join(format!("{label}.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 300 / 10 + 2);
    }
    let bad = decprox().args(["counterexample", "--M", "7"]).status().unwrap();
    assert_eq!(bad.code(), Some(2));
}
