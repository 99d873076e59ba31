//! Proximal operators `prox_{μR}(x) = argmin_z R(z) + ‖z − x‖²/(2μ)`.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Componentwise soft threshold `sgn(x) max(|x| − κ, 0)`.
pub fn prox_l1<T: Scalar>(x: ArrayView1<T>, kappa: T) -> Array1<T> {
    x.mapv(|v| soft(v, kappa))
}

fn soft<T: Scalar>(v: T, kappa: T) -> T {
    if v > kappa {
        v - kappa
    } else if v < -kappa {
        v + kappa
    } else {
        T::zero()
    }
}

/// Sparse matrix whose rows have at most two nonzeros.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRows<T> {
    rows: Vec<Vec<(usize, T)>>,
    cols: usize,
}

impl<T: Scalar> PairRows<T> {
    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[(usize, T)] {
        &self.rows[r]
    }

    pub fn mul_vec(&self, x: ArrayView1<T>) -> Array1<T> {
        self.rows.iter().map(|r| r.iter().fold(T::zero(), |acc, &(j, v)| acc + v * x[j])).collect()
    }

    /// `Dᵀ y`
    pub fn tmul_vec(&self, y: ArrayView1<T>) -> Array1<T> {
        let mut out = Array1::zeros(self.cols);
        for (r, entries) in self.rows.iter().enumerate() {
            for &(j, v) in entries {
                out[j] += v * y[r];
            }
        }
        out
    }

    pub fn to_dense(&self) -> Array2<T> {
        let mut d = Array2::zeros((self.nrows(), self.cols));
        for (r, entries) in self.rows.iter().enumerate() {
            for &(j, v) in entries {
                d[[r, j]] = v;
            }
        }
        d
    }
}

/// The matrices `D1`, `D2` and offset `b1` of the two-agent counterexample.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterexamplePair<T> {
    pub d1: PairRows<T>,
    pub d2: PairRows<T>,
    pub b1: Array1<T>,
    pub dim: usize,
}

/// Which of the two counterexample regularizers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    R1,
    R2,
}

pub fn build_counterexample<T: Scalar>(dim: usize) -> Result<CounterexamplePair<T>> {
    if dim < 2 || dim % 2 != 0 {
        return Err(Error::InvalidDimension(format!("M must be even and at least 2, got {dim}")));
    }
    let half = dim / 2;
    let one = T::one();
    let mut d1 = Vec::with_capacity(half);
    d1.push(vec![(0, T::SQRT_2())]);
    for r in 1..half {
        d1.push(vec![(2 * r - 1, one), (2 * r, -one)]);
    }
    let d2 = (0..half).map(|r| vec![(2 * r, one), (2 * r + 1, -one)]).collect();
    let mut b1 = Array1::zeros(half);
    b1[0] = one;
    Ok(CounterexamplePair {
        d1: PairRows { rows: d1, cols: dim },
        d2: PairRows { rows: d2, cols: dim },
        b1,
        dim,
    })
}

impl<T: Scalar> CounterexamplePair<T> {
    fn parts(&self, which: Which) -> (&PairRows<T>, Option<&Array1<T>>) {
        match which {
            Which::R1 => (&self.d1, Some(&self.b1)),
            Which::R2 => (&self.d2, None),
        }
    }

    /// `D w − b` for the chosen regularizer.
    pub fn affine(&self, which: Which, w: ArrayView1<T>) -> Array1<T> {
        let (d, b) = self.parts(which);
        let mut v = d.mul_vec(w);
        if let Some(b) = b {
            v -= b;
        }
        v
    }

    /// `R_1(w) = ‖D1 w − b1‖₁` or `R_2(w) = ‖D2 w‖₁`.
    pub fn eval(&self, which: Which, w: ArrayView1<T>) -> T {
        self.affine(which, w).iter().fold(T::zero(), |acc, v| acc + v.abs())
    }
}

/// Closed-form prox of `R_1` or `R_2` using `D Dᵀ = 2I`:
/// `x + (1/2μ) Dᵀ [prox_{2μ²g}(μDx − μb) − μDx + μb]` with `g = ‖·‖₁`.
pub fn prox_counterexample<T: Scalar>(
    which: Which,
    pair: &CounterexamplePair<T>,
    x: ArrayView1<T>,
    mu: T,
) -> Result<Array1<T>> {
    prox_counterexample_scaled(which, pair, x, mu, T::one())
}

/// As [`prox_counterexample`] for `scale · R`.
pub fn prox_counterexample_scaled<T: Scalar>(
    which: Which,
    pair: &CounterexamplePair<T>,
    x: ArrayView1<T>,
    mu: T,
    scale: T,
) -> Result<Array1<T>> {
    if x.len() != pair.dim {
        return Err(Error::Shape(format!("input has length {}, expected {}", x.len(), pair.dim)));
    }
    if mu <= T::zero() {
        return Err(Error::Domain("mu must be positive".into()));
    }
    let (d, _) = pair.parts(which);
    let u = pair.affine(which, x).mapv(|v| v * mu);
    let two = T::lit(2.0);
    let step = u.mapv(|v| soft(v, two * mu * mu * scale) - v);
    let mut out = d.tmul_vec(step.view());
    out.mapv_inplace(|v| v / (two * mu));
    out += &x;
    Ok(out)
}

/// Exact prox of the anchored chain total variation
/// `α|z₀ − c| + λ Σ_j |z_j − z_{j+1}|` by dynamic programming over the
/// derivative of the forward messages.
pub fn prox_anchored_chain_tv<T: Scalar>(x: ArrayView1<T>, alpha: T, anchor: T, lambda: T) -> Array1<T> {
    let n = x.len();
    if n == 0 {
        return Array1::zeros(0);
    }
    // derivative pieces are a·z + b; knots hold (position, Δa, Δb)
    let mut knots: VecDeque<(T, T, T)> = VecDeque::new();
    knots.push_back((anchor, T::zero(), T::lit(2.0) * alpha));
    let mut left = (T::one(), -x[0] - alpha);
    let mut right = (T::one(), -x[0] + alpha);
    let mut bounds = Vec::with_capacity(n - 1);

    for j in 0..n - 1 {
        let (lo, piece_lo) = solve_from_left(&mut knots, left, -lambda);
        let (mut hi, mut piece_hi) = (None, right);
        while let Some(&(p, da, db)) = knots.back() {
            if piece_hi.0 * p + piece_hi.1 <= lambda {
                hi = Some((lambda - piece_hi.1) / piece_hi.0);
                break;
            }
            piece_hi = (piece_hi.0 - da, piece_hi.1 - db);
            knots.pop_back();
            // coincident knots act as one breakpoint
            while let Some(&(q, da, db)) = knots.back() {
                if q != p {
                    break;
                }
                piece_hi = (piece_hi.0 - da, piece_hi.1 - db);
                knots.pop_back();
            }
            if piece_hi.0 * p + piece_hi.1 <= lambda {
                hi = Some(p);
                break;
            }
        }
        let hi = match hi {
            Some(h) => h.max(lo),
            None => ((lambda - piece_hi.1) / piece_hi.0).max(lo),
        };
        knots.push_front((lo, piece_lo.0, piece_lo.1 + lambda));
        knots.push_back((hi, -piece_hi.0, lambda - piece_hi.1));
        bounds.push((lo, hi));
        let xn = x[j + 1];
        left = (T::one(), -lambda - xn);
        right = (T::one(), lambda - xn);
    }

    let (root, _) = solve_from_left(&mut knots, left, T::zero());
    let mut z = Array1::zeros(n);
    z[n - 1] = root;
    for j in (0..n - 1).rev() {
        let (lo, hi) = bounds[j];
        z[j] = z[j + 1].max(lo).min(hi);
    }
    z
}

/// Smallest `z` with derivative ≥ `level`, popping knots left of it.
/// Returns the point and the piece active just right of it.
fn solve_from_left<T: Scalar>(knots: &mut VecDeque<(T, T, T)>, mut piece: (T, T), level: T) -> (T, (T, T)) {
    while let Some(&(p, da, db)) = knots.front() {
        if piece.0 * p + piece.1 >= level {
            return ((level - piece.1) / piece.0, piece);
        }
        piece = (piece.0 + da, piece.1 + db);
        knots.pop_front();
        while let Some(&(q, da, db)) = knots.front() {
            if q != p {
                break;
            }
            piece = (piece.0 + da, piece.1 + db);
            knots.pop_front();
        }
        if piece.0 * p + piece.1 >= level {
            return (p, piece);
        }
    }
    ((level - piece.1) / piece.0, piece)
}

/// Non-smooth term `R` with its proximal map.
#[derive(Clone, PartialEq)]
pub enum ProxOperator<T> {
    /// `R = 0`
    Zero,
    /// `R = ρ‖w‖₁`
    L1 { rho: T },
    /// `R = scale · R_1` or `scale · R_2`
    Counterexample { which: Which, pair: Arc<CounterexamplePair<T>>, scale: T },
    /// `R = scale · (R_1 + R_2)`, a single anchored chain total variation
    CounterexampleSum { pair: Arc<CounterexamplePair<T>>, scale: T },
}

impl<T: fmt::Debug> fmt::Debug for ProxOperator<T> {
    // the counterexample matrices are large; print only their size
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProxOperator::Zero => f.write_str("Zero"),
            ProxOperator::L1 { rho } => f.debug_struct("L1").field("rho", rho).finish(),
            ProxOperator::Counterexample { which, pair, scale } => f
                .debug_struct("Counterexample")
                .field("which", which)
                .field("dim", &pair.dim)
                .field("scale", scale)
                .finish(),
            ProxOperator::CounterexampleSum { pair, scale } => {
                f.debug_struct("CounterexampleSum").field("dim", &pair.dim).field("scale", scale).finish()
            }
        }
    }
}

impl<T: fmt::LowerExp> ProxOperator<T> {
    pub fn descriptor(&self) -> String {
        match self {
            ProxOperator::Zero => "zero".into(),
            ProxOperator::L1 { rho } => format!("l1(rho={rho:e})"),
            ProxOperator::Counterexample { which, scale, pair } => {
                format!("{which:?}(M={}, scale={scale:e})", pair.dim)
            }
            ProxOperator::CounterexampleSum { scale, pair } => format!("R1+R2(M={}, scale={scale:e})", pair.dim),
        }
    }
}

impl<T: Scalar> ProxOperator<T> {
    pub fn eval(&self, w: ArrayView1<T>) -> T {
        match self {
            ProxOperator::Zero => T::zero(),
            ProxOperator::L1 { rho } => *rho * w.iter().fold(T::zero(), |acc, v| acc + v.abs()),
            ProxOperator::Counterexample { which, pair, scale } => *scale * pair.eval(*which, w),
            ProxOperator::CounterexampleSum { pair, scale } => {
                *scale * (pair.eval(Which::R1, w) + pair.eval(Which::R2, w))
            }
        }
    }

    pub fn apply(&self, x: ArrayView1<T>, mu: T) -> Array1<T> {
        match self {
            ProxOperator::Zero => x.to_owned(),
            ProxOperator::L1 { rho } => prox_l1(x, mu * *rho),
            ProxOperator::Counterexample { which, pair, scale } => {
                prox_counterexample_scaled(*which, pair, x, mu, *scale).expect("dimension checked at construction")
            }
            ProxOperator::CounterexampleSum { scale, .. } => {
                // R_1 + R_2 = √2|w₀ − 1/√2| + Σ_j |w_j − w_{j+1}|
                let kappa = mu * *scale;
                prox_anchored_chain_tv(x, kappa * T::SQRT_2(), T::FRAC_1_SQRT_2(), kappa)
            }
        }
    }

    pub fn apply_into(&self, x: ArrayView1<T>, mu: T, mut out: ArrayViewMut1<T>) {
        match self {
            ProxOperator::Zero => out.assign(&x),
            ProxOperator::L1 { rho } => out.zip_mut_with(&x, |o, &v| *o = soft(v, mu * *rho)),
            _ => out.assign(&self.apply(x, mu)),
        }
    }

    /// Applies the same operator to every row of a block.
    pub fn apply_rows(&self, x: ArrayView2<T>, mu: T) -> Array2<T> {
        let mut out = Array2::zeros(x.raw_dim());
        for (row, o) in x.rows().into_iter().zip(out.rows_mut()) {
            self.apply_into(row, mu, o);
        }
        out
    }

    /// Expected input length, when the operator fixes one.
    pub fn dim(&self) -> Option<usize> {
        match self {
            ProxOperator::Zero | ProxOperator::L1 { .. } => None,
            ProxOperator::Counterexample { pair, .. } | ProxOperator::CounterexampleSum { pair, .. } => Some(pair.dim),
        }
    }
}

/// Applies `ops[k]` to row `k`.
pub fn apply_per_agent<T: Scalar>(ops: &[ProxOperator<T>], x: ArrayView2<T>, mu: T) -> Array2<T> {
    let mut out = Array2::zeros(x.raw_dim());
    for ((op, row), o) in ops.iter().zip(x.rows()).zip(out.rows_mut()) {
        op.apply_into(row, mu, o);
    }
    out
}

/// Numerical prox of an arbitrary convex `R` for small dimensions.
///
/// Runs the central-cut ellipsoid method on `R(z) + ‖z − x‖²/(2μ)` with
/// central-difference subgradients of `R`, starting from a ball that is
/// guaranteed to contain the minimizer. The best point is returned once
/// strong convexity certifies it lies within `1e-4` of the minimizer
/// (bisection in one dimension).
pub fn brute_force_prox<F>(r: F, x: &[f64], mu: f64, iters: usize) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    const TARGET: f64 = 1e-4;
    let n = x.len();
    if mu <= 0.0 {
        return Err(Error::Domain("mu must be positive".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let objective = |z: &[f64]| r(z) + z.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (2.0 * mu);
    let subgrad = |z: &[f64]| -> Vec<f64> {
        let mut probe = z.to_vec();
        (0..n)
            .map(|i| {
                let h = 1e-7 * z[i].abs().max(1.0);
                probe[i] = z[i] + h;
                let up = r(&probe);
                probe[i] = z[i] - h;
                let down = r(&probe);
                probe[i] = z[i];
                (up - down) / (2.0 * h) + (z[i] - x[i]) / mu
            })
            .collect()
    };
    // ‖z* − x‖ ≤ 2μ‖g‖ for any g ∈ ∂R(x)
    let gx = subgrad(x);
    let radius = 2.0 * mu * gx.iter().map(|v| v * v).sum::<f64>().sqrt() * 1.01 + 1e-9;
    if radius <= 1e-9 + f64::EPSILON {
        return Ok(x.to_vec());
    }

    if n == 1 {
        let (mut lo, mut hi) = (x[0] - radius, x[0] + radius);
        for _ in 0..iters {
            if hi - lo <= 1e-12 * (1.0 + x[0].abs()) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if subgrad(&[mid])[0] > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        return if 0.5 * (hi - lo) <= TARGET {
            Ok(vec![0.5 * (lo + hi)])
        } else {
            Err(Error::OracleFailure(format!("bisection width {:e} after {iters} steps", hi - lo)))
        };
    }

    let nf = n as f64;
    let mut center = x.to_vec();
    let mut p = Array2::<f64>::eye(n) * (radius * radius);
    let mut best = center.clone();
    let mut best_val = objective(&center);
    let mut lower = f64::NEG_INFINITY;
    for _ in 0..iters {
        let val = objective(&center);
        if val < best_val {
            best_val = val;
            best = center.clone();
        }
        let g = Array1::from(subgrad(&center));
        let pg = p.dot(&g);
        let gpg = g.dot(&pg).max(0.0);
        let width = gpg.sqrt();
        lower = lower.max(val - width);
        let gap = (best_val - lower).max(0.0);
        if (2.0 * mu * gap).sqrt() <= TARGET {
            return Ok(best);
        }
        if width == 0.0 {
            return Ok(center);
        }
        let step = &pg / width;
        for (c, s) in center.iter_mut().zip(step.iter()) {
            *c -= s / (nf + 1.0);
        }
        let outer = step.view().insert_axis(ndarray::Axis(1));
        let rank1 = outer.dot(&outer.t());
        p = (&p - &(rank1 * (2.0 / (nf + 1.0)))) * (nf * nf / (nf * nf - 1.0));
        // keep the shape matrix symmetric against rounding drift
        p = (&p + &p.t()) * 0.5;
    }
    Err(Error::OracleFailure(format!(
        "certified distance {:e} after {iters} ellipsoid steps",
        (2.0 * mu * (best_val - lower).max(0.0)).sqrt()
    )))
}
