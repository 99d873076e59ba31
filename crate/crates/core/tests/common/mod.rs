#![allow(dead_code)]

use decprox::costs::{quadratic_forms, SmoothCostSet};
use decprox::netgraph::{build_graph, metropolis_matrix, shift_positive, CombinationMatrix, Graph, GraphKind};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random strongly convex quadratics `½ wᵀH_k w − g_kᵀw` with
/// `H_k = Q Qᵀ / M + 0.5 I`.
pub fn random_quadratics(k: usize, m: usize, seed: u64) -> SmoothCostSet<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms = (0..k)
        .map(|_| {
            let q = Array2::from_shape_fn((m, m), |_| rng.random_range(-1.0..1.0));
            let mut h = q.dot(&q.t()) / m as f64;
            h.diag_mut().mapv_inplace(|v| v + 0.5);
            let g = Array1::from_shape_fn(m, |_| rng.random_range(-2.0..2.0));
            (h, g, 0.0)
        })
        .collect();
    quadratic_forms(terms).unwrap()
}

pub fn random_network(k: usize, seed: u64) -> (Graph, CombinationMatrix<f64>) {
    let g = build_graph(GraphKind::RandomConnected, k, seed, 0.3).unwrap();
    let a = shift_positive(&metropolis_matrix(&g));
    (g, a)
}

pub fn max_rel_dev(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let scale = a.iter().chain(b.iter()).fold(1e-300f64, |m, v| m.max(v.abs()));
    a.iter().zip(b.iter()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}
