//! Rate theory, fixed-point residuals, a centralized reference solver and
//! empirical decay classification.

use ndarray::{Array1, Array2, ArrayView1};

use crate::costs::SmoothCostSet;
use crate::engine::{BlockIterate, RunRecord};
use crate::error::{Error, Result};
use crate::linalg::combine;
use crate::netgraph::ConsensusTriple;
use crate::prox::ProxOperator;
use crate::scalar::Scalar;

/// Which convergence theorem a rate refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theorem {
    /// ATC family, `0 ≤ C < 2I`, `Ā² ≤ I − B²`
    Thm1,
    /// non-ATC family (`Ā = I`), `B² ≤ C < I`
    Thm4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateReport<T> {
    pub theorem: Theorem,
    pub mu: T,
    pub gamma: T,
    pub gamma_primal: T,
    pub gamma_dual: T,
    pub mu_bound: T,
    pub feasible: bool,
}

/// Largest admissible step-size of the chosen theorem.
pub fn step_size_bound<T: Scalar>(theorem: Theorem, delta: T, sigma_max_c: T) -> T {
    match theorem {
        Theorem::Thm1 => (T::lit(2.0) - sigma_max_c) / delta,
        Theorem::Thm4 => T::lit(2.0) * (T::one() - sigma_max_c) / delta,
    }
}

pub fn theoretical_rate<T: Scalar>(
    theorem: Theorem,
    mu: T,
    nu: T,
    delta: T,
    sigma_max_c: T,
    sigma_min_b_sq: T,
) -> Result<RateReport<T>> {
    if !(mu > T::zero()) {
        return Err(Error::Domain(format!("mu must be positive, got {mu:e}")));
    }
    if !(nu > T::zero() && nu <= delta) {
        return Err(Error::Domain(format!("need 0 < nu <= delta, got nu={nu:e}, delta={delta:e}")));
    }
    let c_cap = match theorem {
        Theorem::Thm1 => T::lit(2.0),
        Theorem::Thm4 => T::one(),
    };
    if !(sigma_max_c >= T::zero() && sigma_max_c < c_cap) {
        return Err(Error::Domain(format!("sigma_max(C) = {sigma_max_c:e} outside [0, {c_cap:e})")));
    }
    if !(sigma_min_b_sq > T::zero() && sigma_min_b_sq <= T::one()) {
        return Err(Error::Domain(format!("sigma_min(B²) = {sigma_min_b_sq:e} outside (0, 1]")));
    }
    let two = T::lit(2.0);
    let gamma_primal = match theorem {
        Theorem::Thm1 => T::one() - mu * nu * (two - sigma_max_c - mu * delta),
        Theorem::Thm4 => T::one() - mu * nu * (two - mu * delta / (T::one() - sigma_max_c)),
    };
    let gamma_dual = T::one() - sigma_min_b_sq;
    let mu_bound = step_size_bound(theorem, delta, sigma_max_c);
    Ok(RateReport {
        theorem,
        mu,
        gamma: gamma_primal.max(gamma_dual),
        gamma_primal,
        gamma_dual,
        mu_bound,
        feasible: mu < mu_bound,
    })
}

fn scaled_norm<T: Scalar>(m: &Array2<T>) -> T {
    let n = T::of_usize(m.len().max(1));
    (m.iter().fold(T::zero(), |acc, &v| acc + v * v) / n).sqrt()
}

/// Fixed-point residuals `(r_primal, r_dual, r_prox)` of the primal-dual
/// recursion at `(W, S, Z)`, each a Frobenius norm divided by `√(KM)`.
pub fn fixed_point_residuals<T: Scalar>(
    state: &BlockIterate<T>,
    costs: &SmoothCostSet<T>,
    prox: &ProxOperator<T>,
    triple: &ConsensusTriple<T>,
    mu: T,
) -> (T, T, T) {
    let g = costs.grads(state.w.view());
    let primal = &state.z - &(&state.w - &g.mapv(|v| v * mu) - &state.s);
    let dual = combine(triple.b_sq.view(), state.z.view());
    let combined = combine(triple.a_bar.view(), state.z.view());
    let prox_gap = &state.w - &prox.apply_rows(combined.view(), mu);
    (scaled_norm(&primal), scaled_norm(&dual), scaled_norm(&prox_gap))
}

/// Output of [`centralized_reference`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution<T> {
    pub w: Array1<T>,
    /// `‖(w − prox_{R/δ}(w − ∇f(w)/δ)) δ‖` at return
    pub mapping_norm: T,
    pub iters: usize,
    pub converged: bool,
}

pub const REFERENCE_MAX_ITERS: usize = 1_000_000;

/// Minimizer of `(1/K) Σ_k J_k + R` by proximal gradient with step `1/δ`.
///
/// Stops once the prox-gradient mapping norm is at most `tol`. Hitting the
/// iteration cap logs a warning and returns the last point with
/// `converged = false`.
pub fn centralized_reference<T: Scalar>(costs: &SmoothCostSet<T>, prox: &ProxOperator<T>, tol: T) -> ReferenceSolution<T> {
    let step = T::one() / costs.delta();
    let mut w = Array1::<T>::zeros(costs.dim());
    for it in 0..REFERENCE_MAX_ITERS {
        let g = costs.average_grad(w.view());
        let next = prox.apply(( &w - &g.mapv(|v| v * step)).view(), step);
        let diff = &w - &next;
        let norm = diff.dot(&diff).sqrt() / step;
        if norm <= tol {
            return ReferenceSolution { w: next, mapping_norm: norm, iters: it + 1, converged: true };
        }
        w = next;
    }
    let g = costs.average_grad(w.view());
    let next = prox.apply((&w - &g.mapv(|v| v * step)).view(), step);
    let diff = &w - &next;
    let norm = diff.dot(&diff).sqrt() / step;
    log::warn!("centralized reference stopped at the iteration cap with mapping norm {norm:e}");
    ReferenceSolution { w, mapping_norm: norm, iters: REFERENCE_MAX_ITERS, converged: false }
}

/// Iterates `w⁺ = prox_{μR}(w − μ ∇f(w))` on the network average, returning
/// `w_0, …, w_{iters-1}` after the start point.
pub fn centralized_trajectory<T: Scalar>(
    costs: &SmoothCostSet<T>,
    prox: &ProxOperator<T>,
    start: ArrayView1<T>,
    mu: T,
    iters: usize,
) -> Vec<Array1<T>> {
    let mut w = start.to_owned();
    let mut out = Vec::with_capacity(iters);
    for _ in 0..iters {
        let g = costs.average_grad(w.view());
        w = prox.apply((&w - &g.mapv(|v| v * mu)).view(), mu);
        out.push(w.clone());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Linear,
    Sublinear,
    Inconclusive,
}

/// Tunables for [`classify_decay`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayParams {
    /// Share of the (possibly truncated) rows treated as the tail.
    pub tail_fraction: f64,
    pub n_windows: usize,
    /// Rows at or below `floor · max(error)` end the usable prefix.
    pub floor: f64,
    /// Linear needs every window ratio below `1 − linear_margin`.
    pub linear_margin: f64,
    /// Linear needs `max(1 − r) / min(1 − r)` at most this.
    pub stability: f64,
    /// Sublinear needs the final window ratio at least this.
    pub sublinear_ratio: f64,
}

impl Default for DecayParams {
    fn default() -> Self {
        DecayParams {
            tail_fraction: 0.5,
            n_windows: 5,
            floor: 1e-24,
            linear_margin: 1e-4,
            stability: 2.0,
            sublinear_ratio: 0.999,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitVerdict {
    pub classification: Classification,
    pub geometric_ratio_windows: Vec<f64>,
    /// slope of `log e` against `log i` on the tail
    pub loglog_slope: f64,
    /// slope of `log e` against `i` on the tail
    pub semilog_slope: f64,
    /// residual sums of squares `(semilog, loglog)`
    pub fit_residuals: (f64, f64),
    /// the record was cut at a non-positive or floor-level error
    pub truncated: bool,
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rss = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    (slope, intercept, rss)
}

/// Per-iteration geometric ratio over `[i0, i1]`.
pub fn geometric_ratio(i0: usize, e0: f64, i1: usize, e1: f64) -> f64 {
    ((e1.ln() - e0.ln()) / (i1 - i0) as f64).exp()
}

/// Classifies an error sequence sampled at increasing iterations.
pub fn classify_series(iters: &[usize], errors: &[f64], params: DecayParams) -> FitVerdict {
    let peak = errors.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = params.floor * peak;
    let usable = errors.iter().position(|&e| !(e > cutoff) || !e.is_finite()).unwrap_or(errors.len());
    let truncated = usable < errors.len();
    let pairs: Vec<(usize, f64)> =
        iters[..usable].iter().copied().zip(errors[..usable].iter().copied()).filter(|&(i, _)| i > 0).collect();
    let tail_len = ((pairs.len() as f64) * params.tail_fraction).round() as usize;
    let tail = &pairs[pairs.len() - tail_len.min(pairs.len())..];
    let inconclusive = |truncated| FitVerdict {
        classification: Classification::Inconclusive,
        geometric_ratio_windows: Vec::new(),
        loglog_slope: f64::NAN,
        semilog_slope: f64::NAN,
        fit_residuals: (f64::NAN, f64::NAN),
        truncated,
    };
    if params.n_windows == 0 || tail.len() < 2 * params.n_windows.max(2) {
        return inconclusive(truncated);
    }

    let per = tail.len() / params.n_windows;
    let ratios: Vec<f64> = (0..params.n_windows)
        .map(|w| {
            let first = tail[w * per];
            let last = if w + 1 == params.n_windows { tail[tail.len() - 1] } else { tail[(w + 1) * per] };
            geometric_ratio(first.0, first.1, last.0, last.1)
        })
        .collect();

    let log_e: Vec<f64> = tail.iter().map(|p| p.1.ln()).collect();
    let lin_i: Vec<f64> = tail.iter().map(|p| p.0 as f64).collect();
    let log_i: Vec<f64> = lin_i.iter().map(|i| i.ln()).collect();
    let (semilog_slope, _, semilog_rss) = least_squares(&lin_i, &log_e);
    let (loglog_slope, _, loglog_rss) = least_squares(&log_i, &log_e);

    let gaps: Vec<f64> = ratios.iter().map(|r| 1.0 - r).collect();
    let max_gap = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min_gap = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    let first = ratios[0];
    let last = ratios[ratios.len() - 1];

    let linear = ratios.iter().all(|&r| r < 1.0 - params.linear_margin)
        && min_gap > 0.0
        && max_gap / min_gap <= params.stability
        && semilog_rss <= loglog_rss;
    let sublinear = last >= params.sublinear_ratio && last > first && loglog_rss < semilog_rss;
    let classification = if linear {
        Classification::Linear
    } else if sublinear {
        Classification::Sublinear
    } else {
        Classification::Inconclusive
    };
    FitVerdict {
        classification,
        geometric_ratio_windows: ratios,
        loglog_slope,
        semilog_slope,
        fit_residuals: (semilog_rss, loglog_rss),
        truncated,
    }
}

/// [`classify_series`] on a run's recorded error column.
pub fn classify_decay<T: Scalar>(record: &RunRecord<T>, params: DecayParams) -> FitVerdict {
    let iters: Vec<usize> = record.rows.iter().map(|r| r.iter).collect();
    let errors: Vec<f64> = record.rows.iter().map(|r| r.rel_sq_error.to_f64().unwrap_or(f64::NAN)).collect();
    classify_series(&iters, &errors, params)
}

/// Geometric ratios over consecutive windows spanning `window` iterations,
/// starting at `burn_in` and ending before the error drops to `floor`.
pub fn windowed_ratios(iters: &[usize], errors: &[f64], burn_in: usize, window: usize, floor: f64) -> Vec<f64> {
    let pts: Vec<(usize, f64)> = iters
        .iter()
        .copied()
        .zip(errors.iter().copied())
        .skip_while(|&(i, _)| i < burn_in)
        .take_while(|&(_, e)| e > floor)
        .collect();
    let mut out = Vec::new();
    let mut start = 0;
    for j in 1..pts.len() {
        if pts[j].0 - pts[start].0 >= window {
            out.push(geometric_ratio(pts[start].0, pts[start].1, pts[j].0, pts[j].1));
            start = j;
        }
    }
    out
}
