//! CSV trajectories, metadata sidecars and the summary table.

use std::fmt::Write as _;
use std::path::PathBuf;

use decprox::analysis::{Classification, ReferenceSolution};
use decprox::engine::{RunRecord, RunStatus};
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::experiment::Outcome;
use crate::CliError;

pub const TRAJECTORY_HEADER: &str = "iter,comm_rounds,rel_sq_error,r_primal,r_dual,r_prox";
pub const SUMMARY_HEADER: &str =
    "algorithm,mu,theoretical_gamma,empirical_ratio,final_error,comm_rounds,verdict,status";
pub const PLOT_HEADER: &str = "algorithm,iter,comm_rounds,rel_sq_error";

/// Fixed 17-significant-digit formatting.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn trajectory_csv(record: &RunRecord<f64>) -> String {
    let mut out = String::with_capacity(64 * (record.rows.len() + 1));
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for row in &record.rows {
        let (p, d, x) = match row.residuals {
            Some((p, d, x)) => (num(p), num(d), num(x)),
            None => Default::default(),
        };
        writeln!(out, "{},{},{},{p},{d},{x}", row.iter, row.comm_rounds, num(row.rel_sq_error)).expect("string write");
    }
    out
}

pub fn verdict_name(c: Classification) -> &'static str {
    match c {
        Classification::Linear => "linear",
        Classification::Sublinear => "sublinear",
        Classification::Inconclusive => "inconclusive",
    }
}

pub fn status_name(status: &RunStatus) -> String {
    match status {
        RunStatus::Completed => "completed".into(),
        RunStatus::Diverged { iter, .. } => format!("diverged@{iter}"),
    }
}

pub fn trajectory_path(cfg: &ExperimentConfig, label: &str) -> PathBuf {
    cfg.output_dir.join(format!("{label}.csv"))
}

fn meta_json(cfg: &ExperimentConfig, reference: &ReferenceSolution<f64>, o: &Outcome) -> serde_json::Value {
    let r = &o.resolved;
    let rate = r.rate.map(|g| {
        json!({
            "theorem": format!("{:?}", g.theorem),
            "gamma": g.gamma,
            "gamma_primal": g.gamma_primal,
            "gamma_dual": g.gamma_dual,
            "mu_bound": g.mu_bound,
            "feasible": g.feasible,
        })
    });
    let spectral = r.spectral.as_ref().map(|s| {
        json!({
            "sigma_max_c": s.sigma_max_c,
            "sigma_min_b_sq": s.sigma_min_b_sq,
            "lambda2_a": s.lambda2_a,
            "assumption2_ok": s.assumption2_ok,
            "assumption4_ok": s.assumption4_ok,
        })
    });
    let status = match &o.record.status {
        RunStatus::Completed => json!({"completed": true}),
        RunStatus::Diverged { iter, reason } => json!({"completed": false, "iter": iter, "reason": reason}),
    };
    json!({
        "config": cfg,
        "algorithm": {
            "label": r.label,
            "name": r.entry.name,
            "requested_mu": r.entry.mu,
            "mu": r.mu,
            "mu_bound": r.mu_bound,
            "c": r.c,
            "comm_rounds_per_iter": r.spec.comm_rounds_per_iter,
            "prox": match r.spec.common_prox() {
                Some(p) => p.descriptor(),
                None => "per-agent".to_string(),
            },
        },
        "spectral": spectral,
        "rate": rate,
        "reference": {
            "iters": reference.iters,
            "converged": reference.converged,
            "mapping_norm": reference.mapping_norm,
        },
        "status": status,
        "verdict": {
            "classification": verdict_name(o.verdict.classification),
            "window_ratios": o.verdict.geometric_ratio_windows,
            "loglog_slope": o.verdict.loglog_slope,
            "semilog_slope": o.verdict.semilog_slope,
            "fit_rss": [o.verdict.fit_residuals.0, o.verdict.fit_residuals.1],
            "truncated": o.verdict.truncated,
        },
    })
}

pub fn write_algorithm_files(
    cfg: &ExperimentConfig,
    reference: &ReferenceSolution<f64>,
    o: &Outcome,
) -> Result<(), CliError> {
    let label = &o.resolved.label;
    std::fs::write(trajectory_path(cfg, label), trajectory_csv(&o.record))?;
    let meta = serde_json::to_string_pretty(&meta_json(cfg, reference, o)).expect("metadata serializes");
    std::fs::write(cfg.output_dir.join(format!("{label}.meta.json")), meta + "\n")?;
    Ok(())
}

pub fn summary_csv(outcomes: &[Outcome]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for o in outcomes {
        let last = o.record.rows.last();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            o.resolved.label,
            num(o.resolved.mu),
            opt_num(o.resolved.rate.map(|r| r.gamma)),
            opt_num(o.empirical_ratio()),
            num(o.record.final_error()),
            last.map_or(0, |r| r.comm_rounds),
            verdict_name(o.verdict.classification),
            status_name(&o.record.status),
        )
        .expect("string write");
    }
    out
}

pub fn write_summary(cfg: &ExperimentConfig, outcomes: &[Outcome]) -> Result<(), CliError> {
    std::fs::write(cfg.output_dir.join("summary.csv"), summary_csv(outcomes))?;
    Ok(())
}

/// Long-format table with both iteration and communication-round axes.
pub fn write_plot_table(cfg: &ExperimentConfig, outcomes: &[Outcome]) -> Result<(), CliError> {
    let mut out = String::from(PLOT_HEADER);
    out.push('\n');
    for o in outcomes {
        for row in &o.record.rows {
            writeln!(out, "{},{},{},{}", o.resolved.label, row.iter, row.comm_rounds, num(row.rel_sq_error))
                .expect("string write");
        }
    }
    std::fs::write(cfg.output_dir.join("plot.csv"), out)?;
    Ok(())
}
