mod common;

use common::{random_network, random_quadratics};
use decprox::analysis::{centralized_reference, centralized_trajectory, fixed_point_residuals};
use decprox::costs::{logistic_cost, partition_data, quadratic_cost, quadratic_forms, synthetic_classification, SmoothCostSet};
use decprox::engine::{puda_step, random_init, run, AgentVariant, AlgorithmSpec, BlockIterate, RunOptions};
use decprox::linalg::identity;
use decprox::netgraph::{build_graph, metropolis_matrix, table1_matrices, AlgorithmId, ConsensusTriple, GraphKind};
use decprox::prox::ProxOperator;
use nalgebra::DMatrix;
use ndarray::{array, Array1, Array2, Axis};

const LASSO_TARGETS: [f64; 5] = [1.5, -0.3, 2.2, 0.4, 0.9];
const LASSO_RHO: f64 = 0.2;

/// `J_k(w) = ½(w − a_k)²` on a scalar, with `R = ρ|w|`.
fn scalar_lasso() -> (SmoothCostSet<f64>, ProxOperator<f64>, Array1<f64>) {
    let terms = LASSO_TARGETS.iter().map(|&a| (array![[1.0]], array![a], 0.5 * a * a)).collect();
    let costs = quadratic_forms(terms).unwrap();
    let mean = LASSO_TARGETS.iter().sum::<f64>() / LASSO_TARGETS.len() as f64;
    let w_star = array![mean.signum() * (mean.abs() - LASSO_RHO).max(0.0)];
    (costs, ProxOperator::L1 { rho: LASSO_RHO }, w_star)
}

fn ring_a(k: usize) -> decprox::CombinationMatrixF64 {
    metropolis_matrix(&build_graph(GraphKind::Ring, k, 0, 0.0).unwrap())
}

#[test]
fn complete_graph_puda_is_centralized_proximal_gradient() {
    let (k, m, mu) = (5, 3, 0.3);
    let costs = random_quadratics(k, m, 21);
    let prox = ProxOperator::L1 { rho: 0.4 };
    let avg = Array2::from_elem((k, k), 1.0 / k as f64);
    let triple = ConsensusTriple::new(avg.clone(), identity::<f64>(k) - &avg, Array2::zeros((k, k))).unwrap();
    let w0 = random_init::<f64>(k, m, 8, true);
    let reference = centralized_trajectory(&costs, &prox, w0.row(0), mu, 100);
    let mut state = BlockIterate::new(w0);
    for want in &reference {
        puda_step(&mut state, &triple, &costs, &prox, mu).unwrap();
        for row in state.w.rows() {
            let gap = (&row - want).iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            assert!(gap <= 1e-12, "iteration {}: gap {gap:e}", state.iter);
        }
    }
}

#[test]
fn prox_ed_solves_scalar_lasso() {
    let (costs, prox, w_star) = scalar_lasso();
    let spec = AlgorithmSpec::agent_form(AgentVariant::ProxEd, &ring_a(5), 0.9, prox).unwrap();
    let rec = run(&spec, &costs, w_star.view(), &RunOptions::new(200, 1)).unwrap();
    assert!(rec.final_error() <= 1e-10, "error {:e}", rec.final_error());
}

#[test]
fn communication_rounds_accumulate_per_iteration() {
    let (costs, prox, w_star) = scalar_lasso();
    let a = ring_a(5);
    for (variant, rounds) in [(AgentVariant::ProxEd, 1), (AgentVariant::ProxAtc1, 2), (AgentVariant::ProxAtc2, 2)] {
        let spec = AlgorithmSpec::agent_form(variant, &a, 0.5, prox.clone()).unwrap();
        let rec = run(&spec, &costs, w_star.view(), &RunOptions::new(30, 3)).unwrap();
        assert_eq!(rec.rows.len(), 11);
        for row in &rec.rows {
            assert_eq!(row.comm_rounds, rounds * row.iter, "{variant:?}");
        }
    }
}

#[test]
fn residuals_vanish_at_convergence_only() {
    let (costs, prox, w_star) = scalar_lasso();
    let spec = AlgorithmSpec::agent_form(AgentVariant::ProxEd, &ring_a(5), 0.9, prox.clone()).unwrap();
    let rec = run(&spec, &costs, w_star.view(), &RunOptions::new(400, 400)).unwrap();
    assert!(rec.final_error() <= 1e-12);
    let (p, d, x) = rec.rows.last().unwrap().residuals.unwrap();
    assert!(p <= 1e-9 && d <= 1e-9 && x <= 1e-9, "{p:e} {d:e} {x:e}");

    let triple = spec.triple.as_ref().unwrap();
    let mut random = BlockIterate::new(random_init::<f64>(5, 1, 4, false));
    random.z = random_init(5, 1, 5, false);
    random.s = random_init(5, 1, 6, false);
    let (p, d, x) = fixed_point_residuals(&random, &costs, &prox, triple, 0.9);
    assert!(p.max(d).max(x) > 1e-3);
}

#[test]
fn unconstrained_minimum_has_zero_residuals() {
    let costs = quadratic_cost(2.0, 1, 3).unwrap();
    let triple = ConsensusTriple::new(identity::<f64>(1), Array2::zeros((1, 1)), Array2::zeros((1, 1))).unwrap();
    let mut state = BlockIterate::<f64>::zeros(1, 3);
    state.z = state.w.clone();
    assert_eq!(fixed_point_residuals(&state, &costs, &ProxOperator::Zero, &triple, 0.1), (0.0, 0.0, 0.0));
}

#[test]
fn fixed_point_is_stationary() {
    let (costs, prox, w_star) = scalar_lasso();
    let a = ring_a(5);
    let triple = table1_matrices(AlgorithmId::ExactDiffusion, &a, 1.0, 0.9, None).unwrap();
    let spec = AlgorithmSpec::puda(triple.clone(), 0.9, prox.clone()).unwrap();
    let rec = run(&spec, &costs, w_star.view(), &RunOptions::new(600, 600)).unwrap();
    let mut state = rec.final_state.clone();
    puda_step(&mut state, &triple, &costs, &prox, 0.9).unwrap();
    let moved = |a: &Array2<f64>, b: &Array2<f64>| (a - b).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(moved(&state.w, &rec.final_state.w) <= 1e-12);
    assert!(moved(&state.s, &rec.final_state.s) <= 1e-12);
    assert!(moved(&state.z, &rec.final_state.z) <= 1e-12);
}

#[test]
fn dual_surrogate_columns_average_to_zero() {
    let (k, m) = (7, 3);
    let costs = random_quadratics(k, m, 2);
    let (_, a) = random_network(k, 9);
    for id in [AlgorithmId::ExactDiffusion, AlgorithmId::AugDgm, AlgorithmId::AtcTracking] {
        let triple = table1_matrices(id, &a, 1.0, 0.1, None).unwrap();
        let mut state = BlockIterate::new(random_init::<f64>(k, m, 1, false));
        for _ in 0..150 {
            puda_step(&mut state, &triple, &costs, &ProxOperator::L1 { rho: 0.1 }, 0.1).unwrap();
            let col_mean = state.s.mean_axis(Axis(0)).unwrap();
            assert!(col_mean.iter().all(|v| v.abs() <= 1e-12), "{id}: {col_mean}");
        }
    }
}

#[test]
fn centralized_reference_examples() {
    let shifted = quadratic_forms(vec![(array![[1.0f64]], array![3.0], 0.0)]).unwrap();
    let sol = centralized_reference(&shifted, &ProxOperator::L1 { rho: 1.0 }, 1e-13);
    assert!(sol.converged);
    assert!((sol.w[0] - 2.0).abs() <= 1e-12);

    let ridge = quadratic_cost(1.5f64, 3, 4).unwrap();
    let sol = centralized_reference(&ridge, &ProxOperator::Zero, 1e-13);
    assert!(sol.w.iter().all(|v| v.abs() <= 1e-12));
}

#[test]
fn centralized_reference_is_self_consistent() {
    let data = synthetic_classification(200, 10, 0.1, 3);
    let shards = partition_data(&data, 10, 3).unwrap();
    let costs = logistic_cost::<f64>(&shards, 0.1).unwrap();
    let prox = ProxOperator::L1 { rho: 0.01 };
    let coarse = centralized_reference(&costs, &prox, 1e-13);
    let fine = centralized_reference(&costs, &prox, 1e-15);
    assert!(coarse.converged && fine.converged);
    let gap = (&coarse.w - &fine.w).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(gap <= 1e-12, "gap {gap:e}");
}

#[test]
fn logistic_smoothness_matches_dense_spectrum() {
    let data = synthetic_classification(90, 6, 0.1, 12);
    let shards = partition_data(&data, 3, 12).unwrap();
    let lambda = 0.05;
    let costs = logistic_cost::<f64>(&shards, lambda).unwrap();
    let mut worst = 0.0f64;
    for shard in &shards {
        let x = shard.to_dense::<f64>();
        let x = DMatrix::from_row_slice(x.nrows(), x.ncols(), x.as_slice().unwrap());
        let top = (x.transpose() * &x).symmetric_eigenvalues().max();
        worst = worst.max(top / (4.0 * shard.len() as f64));
    }
    let want = lambda + worst;
    assert!((costs.delta() - want).abs() <= 1e-8 * want, "{} vs {want}", costs.delta());
    assert!(costs.delta() <= lambda + 0.25 + 1e-12);
    assert_eq!(costs.nu(), lambda);
}

#[test]
fn single_precision_run_converges() {
    let terms = LASSO_TARGETS.iter().map(|&a| (array![[1.0f32]], array![a as f32], 0.0f32)).collect();
    let costs = quadratic_forms(terms).unwrap();
    let a = metropolis_matrix::<f32>(&build_graph(GraphKind::Ring, 5, 0, 0.0).unwrap());
    let spec = AlgorithmSpec::agent_form(AgentVariant::ProxEd, &a, 0.9f32, ProxOperator::L1 { rho: 0.2 }).unwrap();
    let (_, _, w_star) = scalar_lasso();
    let w_star = w_star.mapv(|v| v as f32);
    let rec: decprox::RunRecordF32 = run(&spec, &costs, w_star.view(), &RunOptions::new(200, 10)).unwrap();
    assert!(rec.final_error() <= 1e-8, "error {:e}", rec.final_error());
}
