//! Builds problems from a configuration and runs the algorithm list.

use std::sync::Arc;
use std::time::Duration;

use decprox::analysis::{
    centralized_reference, classify_decay, step_size_bound, theoretical_rate, DecayParams, FitVerdict, RateReport,
    ReferenceSolution, Theorem,
};
use decprox::costs::{least_squares_cost, logistic_cost, partition_data, quadratic_cost, synthetic_classification, Dataset, SmoothCostSet};
use decprox::engine::{random_init, run, AgentVariant, AlgorithmSpec, RunOptions, RunRecord};
use decprox::linalg::symmetric_eigenvalues;
use decprox::netgraph::{
    build_graph, laplacian_matrix, metropolis_matrix, table1_matrices, validate_assumptions, AlgorithmId,
    CombinationMatrix, ConsensusTriple, Graph, SpectralReport,
};
use decprox::prox::{build_counterexample, ProxOperator, Which};
use ndarray::{Array1, Array2};

use crate::config::{AlgorithmEntry, AlgorithmName, DataSource, ExperimentConfig, Problem, StepSize};
use crate::libsvm::read_libsvm;
use crate::output;
use crate::CliError;

/// Fraction of the theoretical bound used for `"auto"` step-sizes.
pub const AUTO_FRACTION: f64 = 0.9;
const REFERENCE_TOL: f64 = 1e-13;

/// A concrete problem: network, costs, regularizers and the solution.
#[derive(Debug, Clone)]
pub struct Instance {
    pub graph: Graph,
    pub a: CombinationMatrix<f64>,
    pub laplacian: Array2<f64>,
    pub costs: SmoothCostSet<f64>,
    /// the shared regularizer
    pub common: ProxOperator<f64>,
    /// one regularizer per agent; the average of these equals `common`
    pub per_agent: Vec<ProxOperator<f64>>,
    pub reference: ReferenceSolution<f64>,
}

fn load_data(cfg: &ExperimentConfig) -> Result<Dataset, CliError> {
    match &cfg.data {
        DataSource::Synthetic { samples, dim, flip } => Ok(synthetic_classification(*samples, *dim, *flip, cfg.seeds.data)),
        DataSource::Libsvm { path, normalize, label_map, dim } => Ok(read_libsvm(path, *normalize, *label_map, *dim)?),
        DataSource::Counterexample { .. } => Err(CliError::Config("counterexample data has no samples".into())),
    }
}

pub fn build_instance(cfg: &ExperimentConfig) -> Result<Instance, CliError> {
    let graph = build_graph(cfg.graph.kind, cfg.graph.k, cfg.graph.seed, cfg.graph.extra_edge_prob)?;
    let a = metropolis_matrix::<f64>(&graph);
    let laplacian = laplacian_matrix::<f64>(&graph);
    let k = graph.k();
    let (costs, common, per_agent) = match cfg.problem {
        Problem::Counterexample => {
            let DataSource::Counterexample { m } = cfg.data else {
                return Err(CliError::Config("the counterexample problem takes data.counterexample".into()));
            };
            let costs = quadratic_cost(cfg.eta, k, m)?;
            let pair = Arc::new(build_counterexample::<f64>(m)?);
            let per_agent = [Which::R1, Which::R2]
                .into_iter()
                .map(|which| ProxOperator::Counterexample { which, pair: pair.clone(), scale: 1.0 })
                .collect();
            // (1/K) Σ_k R_k as one operator
            let common = ProxOperator::CounterexampleSum { pair, scale: 1.0 / k as f64 };
            (costs, common, per_agent)
        }
        Problem::LassoQuadratic | Problem::LogisticL1 => {
            let data = load_data(cfg)?;
            let shards = partition_data(&data, k, cfg.seeds.partition)?;
            let costs = if cfg.problem == Problem::LogisticL1 {
                logistic_cost(&shards, cfg.lambda)?
            } else {
                let dense: Vec<(Array2<f64>, Array1<f64>)> = shards
                    .iter()
                    .map(|s| (s.to_dense::<f64>(), s.samples.iter().map(|x| x.label).collect()))
                    .collect();
                least_squares_cost(&dense, cfg.lambda)?
            };
            let common = ProxOperator::L1 { rho: cfg.rho };
            (costs, common.clone(), vec![common; k])
        }
    };
    let reference = centralized_reference(&costs, &common, REFERENCE_TOL);
    if !reference.converged {
        log::warn!("reference solution did not reach tolerance {REFERENCE_TOL:e}");
    }
    Ok(Instance { graph, a, laplacian, costs, common, per_agent, reference })
}

/// One algorithm with its step-size and theory resolved.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub entry: AlgorithmEntry,
    pub label: String,
    pub mu: f64,
    pub c: Option<f64>,
    /// largest step-size the relevant theorem allows
    pub mu_bound: f64,
    pub spec: AlgorithmSpec<f64>,
    /// triple whose spectrum enters the rate
    pub theory_triple: ConsensusTriple<f64>,
    pub spectral: Option<SpectralReport<f64>>,
    pub rate: Option<RateReport<f64>>,
}

fn theory_id(name: AlgorithmName) -> AlgorithmId {
    match name {
        AlgorithmName::ProxEd => AlgorithmId::ExactDiffusion,
        AlgorithmName::ProxAtc1 => AlgorithmId::AugDgm,
        AlgorithmName::ProxAtc2 => AlgorithmId::AtcTracking,
        AlgorithmName::Puda(id) => id,
        AlgorithmName::PgExtra => AlgorithmId::Extra,
        AlgorithmName::DlAdmm => AlgorithmId::Dlm,
    }
}

fn sigma_max(m: &Array2<f64>) -> f64 {
    symmetric_eigenvalues(m.view()).iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
}

pub fn resolve(cfg: &ExperimentConfig, inst: &Instance, entry: &AlgorithmEntry) -> Result<Resolved, CliError> {
    let c = cfg.c_for(entry);
    let id = theory_id(entry.name);
    let delta = inst.costs.delta();
    let penalty_c = || c.ok_or_else(|| CliError::Config(format!("{} needs c", entry.name)));

    let (theorem, mu_bound) = if id == AlgorithmId::Dlm {
        // C = cμL, so the non-ATC bound μ < 2(1 − cμσ(L))/δ solves to this
        (Theorem::Thm4, 1.0 / (delta / 2.0 + penalty_c()? * sigma_max(&inst.laplacian)))
    } else {
        let triple = table1_matrices(id, &inst.a, c.unwrap_or(1.0), 1.0, None)?;
        let theorem = if id.is_atc() { Theorem::Thm1 } else { Theorem::Thm4 };
        (theorem, step_size_bound(theorem, delta, sigma_max(&triple.c)))
    };
    let mu = match entry.mu {
        StepSize::Fixed(mu) => mu,
        StepSize::Auto if mu_bound > 0.0 && mu_bound.is_finite() => AUTO_FRACTION * mu_bound,
        StepSize::Auto => {
            return Err(CliError::Config(format!("{}: no positive step-size bound for \"auto\"", entry.name)));
        }
    };

    let theory_triple = table1_matrices(id, &inst.a, c.unwrap_or(1.0), mu, Some(&inst.laplacian))?;
    let spec = match entry.name {
        AlgorithmName::ProxEd => AlgorithmSpec::agent_form(AgentVariant::ProxEd, &inst.a, mu, inst.common.clone())?,
        AlgorithmName::ProxAtc1 => AlgorithmSpec::agent_form(AgentVariant::ProxAtc1, &inst.a, mu, inst.common.clone())?,
        AlgorithmName::ProxAtc2 => AlgorithmSpec::agent_form(AgentVariant::ProxAtc2, &inst.a, mu, inst.common.clone())?,
        AlgorithmName::Puda(_) => AlgorithmSpec::puda(theory_triple.clone(), mu, inst.common.clone())?,
        AlgorithmName::PgExtra => AlgorithmSpec::pg_extra(&inst.a, mu, inst.per_agent.clone())?,
        AlgorithmName::DlAdmm => AlgorithmSpec::dl_admm(penalty_c()?, inst.laplacian.clone(), mu, inst.per_agent.clone())?,
    }
    .with_label(entry.name.label());

    let spectral = validate_assumptions(&theory_triple).ok();
    let rate = match (&spectral, entry.name.is_separate()) {
        (Some(s), false) => {
            theoretical_rate(theorem, mu, inst.costs.nu(), delta, s.sigma_max_c, s.sigma_min_b_sq).ok()
        }
        _ => None,
    };
    Ok(Resolved { entry: entry.clone(), label: entry.name.label(), mu, c, mu_bound, spec, theory_triple, spectral, rate })
}

pub fn resolve_all(cfg: &ExperimentConfig, inst: &Instance) -> Result<Vec<Resolved>, CliError> {
    cfg.algorithms.iter().map(|e| resolve(cfg, inst, e)).collect()
}

/// Finished run of one algorithm.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub resolved: Resolved,
    pub record: RunRecord<f64>,
    pub verdict: FitVerdict,
}

impl Outcome {
    /// Final-window geometric ratio of the error.
    pub fn empirical_ratio(&self) -> Option<f64> {
        self.verdict.geometric_ratio_windows.last().copied().filter(|r| r.is_finite())
    }
}

pub struct ExperimentReport {
    pub outcomes: Vec<Outcome>,
    pub reference: ReferenceSolution<f64>,
}

impl ExperimentReport {
    pub fn any_diverged(&self) -> bool {
        self.outcomes.iter().any(|o| o.record.diverged())
    }
}

fn run_one(cfg: &ExperimentConfig, inst: &Instance, resolved: Resolved) -> Result<Outcome, CliError> {
    let mut opts = RunOptions::new(cfg.iters, cfg.record_every);
    if let Some(seed) = cfg.seeds.init {
        opts.init = Some(random_init(inst.costs.k(), inst.costs.dim(), seed, false));
        opts.seed = Some(seed);
    }
    let record = run(&resolved.spec, &inst.costs, inst.reference.w.view(), &opts)?;
    let verdict = classify_decay(&record, DecayParams::default());
    Ok(Outcome { resolved, record, verdict })
}

/// Runs every algorithm in parallel, writes one CSV and metadata file per
/// algorithm as it finishes, then the summary and plot tables.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, CliError> {
    let inst = build_instance(cfg)?;
    let resolved = resolve_all(cfg, &inst)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let results: Vec<Result<Outcome, CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = resolved
            .into_iter()
            .map(|r| {
                let inst = &inst;
                scope.spawn(move || {
                    let outcome = run_one(cfg, inst, r)?;
                    output::write_algorithm_files(cfg, &inst.reference, &outcome)?;
                    Ok(outcome)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker thread panicked")).collect()
    });
    let outcomes = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    for o in &outcomes {
        log::info!("{} finished in {:.3?}", o.resolved.label, o.record.wall_time);
        if let decprox::engine::RunStatus::Diverged { iter, reason } = &o.record.status {
            log::warn!("{} diverged at iteration {iter}: {reason}", o.resolved.label);
        }
    }
    output::write_summary(cfg, &outcomes)?;
    output::write_plot_table(cfg, &outcomes)?;
    Ok(ExperimentReport { outcomes, reference: inst.reference })
}

/// Total wall time of the runs, for reporting only.
pub fn total_wall_time(report: &ExperimentReport) -> Duration {
    report.outcomes.iter().map(|o| o.record.wall_time).sum()
}
