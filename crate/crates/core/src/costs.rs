//! Per-agent smooth costs `J_k` with gradients and curvature constants.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigenvalues;
use crate::scalar::Scalar;

/// One labelled sample with sparse 0-indexed features.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<(usize, f64)>,
    pub label: f64,
}

impl Sample {
    pub fn norm(&self) -> f64 {
        self.features.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    /// Rescales to unit Euclidean norm; zero vectors are left alone.
    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            for (_, v) in &mut self.features {
                *v /= n;
            }
        }
    }
}

/// Binary classification data with labels in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub dim: usize,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, dim: usize) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            if s.label != 1.0 && s.label != -1.0 {
                return Err(Error::InvalidData(format!("sample {i} has label {} not in {{-1, +1}}", s.label)));
            }
            if let Some(&(j, _)) = s.features.iter().find(|(j, _)| *j >= dim) {
                return Err(Error::InvalidData(format!("sample {i} has feature index {j} >= dimension {dim}")));
            }
        }
        Ok(Dataset { samples, dim })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn normalize(&mut self) {
        self.samples.iter_mut().for_each(Sample::normalize);
    }

    pub fn to_dense<T: Scalar>(&self) -> Array2<T> {
        let mut x = Array2::zeros((self.len(), self.dim));
        for (i, s) in self.samples.iter().enumerate() {
            for &(j, v) in &s.features {
                x[[i, j]] = T::lit(v);
            }
        }
        x
    }
}

/// Standard-normal features scaled to unit norm, labels from a planted
/// hyperplane with a fraction of them flipped.
pub fn synthetic_classification(n: usize, dim: usize, flip: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planted: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let samples = (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let margin: f64 = x.iter().zip(&planted).map(|(a, b)| a * b).sum();
            let mut label = if margin >= 0.0 { 1.0 } else { -1.0 };
            if rng.random::<f64>() < flip {
                label = -label;
            }
            let mut s = Sample { features: x.into_iter().enumerate().collect(), label };
            s.normalize();
            s
        })
        .collect();
    Dataset { samples, dim }
}

/// Shuffles by `seed` and deals contiguous chunks whose sizes differ by at
/// most one (the first `n mod K` shards get the extra sample).
pub fn partition_data(d: &Dataset, k: usize, seed: u64) -> Result<Vec<Dataset>> {
    if k == 0 || d.len() < k {
        return Err(Error::InvalidSize(format!("cannot split {} samples across {k} agents", d.len())));
    }
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = d.len() / k;
    let extra = d.len() % k;
    let mut shards = Vec::with_capacity(k);
    let mut next = 0;
    for i in 0..k {
        let size = base + usize::from(i < extra);
        let samples = order[next..next + size].iter().map(|&j| d.samples[j].clone()).collect();
        shards.push(Dataset { samples, dim: d.dim });
        next += size;
    }
    Ok(shards)
}

/// Compressed sparse rows for one agent's feature matrix.
#[derive(Debug, Clone, PartialEq)]
struct SparseRows<T> {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
    labels: Vec<T>,
}

impl<T: Scalar> SparseRows<T> {
    fn from_dataset(d: &Dataset) -> Self {
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for s in &d.samples {
            for &(j, v) in &s.features {
                indices.push(j);
                values.push(T::lit(v));
            }
            indptr.push(indices.len());
        }
        let labels = d.samples.iter().map(|s| T::lit(s.label)).collect();
        SparseRows { indptr, indices, values, labels }
    }

    fn rows(&self) -> usize {
        self.labels.len()
    }

    fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    fn row_dot(&self, r: usize, w: ArrayView1<T>) -> T {
        self.row(r).fold(T::zero(), |acc, (j, v)| acc + v * w[j])
    }

    /// Largest eigenvalue of `XᵀX` by power iteration.
    fn gram_norm(&self, dim: usize) -> T {
        let mut v = Array1::from_elem(dim, T::one() / T::of_usize(dim).sqrt());
        let mut lambda = T::zero();
        for _ in 0..1000 {
            let mut next = Array1::<T>::zeros(dim);
            for r in 0..self.rows() {
                let t = self.row_dot(r, v.view());
                for (j, x) in self.row(r) {
                    next[j] += x * t;
                }
            }
            let norm = next.dot(&next).sqrt();
            if norm == T::zero() {
                return T::zero();
            }
            next.mapv_inplace(|x| x / norm);
            let done = (norm - lambda).abs() <= T::lit(1e-13) * norm;
            lambda = norm;
            v = next;
            if done {
                break;
            }
        }
        lambda
    }
}

fn softplus<T: Scalar>(t: T) -> T {
    t.max(T::zero()) + (-t.abs()).exp().ln_1p()
}

fn sigmoid<T: Scalar>(t: T) -> T {
    if t >= T::zero() {
        T::one() / (T::one() + (-t).exp())
    } else {
        let e = t.exp();
        e / (T::one() + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum AgentCost<T> {
    /// `eta/2 ‖w‖²`
    Ridge { eta: T },
    /// `½ wᵀHw − gᵀw + c`
    Quadratic { h: Array2<T>, g: Array1<T>, c: T },
    /// `(1/L) Σ ln(1 + exp(−y xᵀw)) + λ/2 ‖w‖²`
    Logistic { data: SparseRows<T>, lambda: T },
}

/// Which constructor produced a [`SmoothCostSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostFamily {
    Quadratic,
    Logistic,
    Custom,
}

/// The K local costs of a decentralized problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothCostSet<T> {
    agents: Vec<AgentCost<T>>,
    dim: usize,
    nu: T,
    delta: T,
    family: CostFamily,
}

impl<T: Scalar> SmoothCostSet<T> {
    pub fn k(&self) -> usize {
        self.agents.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nu(&self) -> T {
        self.nu
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn family(&self) -> CostFamily {
        self.family
    }

    pub fn eval(&self, k: usize, w: ArrayView1<T>) -> T {
        match &self.agents[k] {
            AgentCost::Ridge { eta } => *eta * T::lit(0.5) * w.dot(&w),
            AgentCost::Quadratic { h, g, c } => T::lit(0.5) * w.dot(&h.dot(&w)) - g.dot(&w) + *c,
            AgentCost::Logistic { data, lambda } => {
                let loss = (0..data.rows())
                    .fold(T::zero(), |acc, r| acc + softplus(-data.labels[r] * data.row_dot(r, w)));
                loss / T::of_usize(data.rows()) + *lambda * T::lit(0.5) * w.dot(&w)
            }
        }
    }

    /// Writes `∇J_k(w)` into `out`.
    pub fn grad_into(&self, k: usize, w: ArrayView1<T>, mut out: ArrayViewMut1<T>) {
        match &self.agents[k] {
            AgentCost::Ridge { eta } => out.zip_mut_with(&w, |o, &x| *o = *eta * x),
            AgentCost::Quadratic { h, g, .. } => {
                out.assign(&h.dot(&w));
                out -= g;
            }
            AgentCost::Logistic { data, lambda } => {
                out.zip_mut_with(&w, |o, &x| *o = *lambda * x);
                let inv_l = T::one() / T::of_usize(data.rows());
                for r in 0..data.rows() {
                    let y = data.labels[r];
                    let coef = -y * sigmoid(-y * data.row_dot(r, w)) * inv_l;
                    for (j, v) in data.row(r) {
                        out[j] += coef * v;
                    }
                }
            }
        }
    }

    pub fn grad(&self, k: usize, w: ArrayView1<T>) -> Array1<T> {
        let mut out = Array1::zeros(self.dim);
        self.grad_into(k, w, out.view_mut());
        out
    }

    /// Row `k` of the result is `∇J_k(W[k, :])`.
    pub fn grads(&self, w: ArrayView2<T>) -> Array2<T> {
        let mut out = Array2::zeros(w.raw_dim());
        for (k, (row, o)) in w.rows().into_iter().zip(out.rows_mut()).enumerate() {
            self.grad_into(k, row, o);
        }
        out
    }

    /// Gradient of the network average `(1/K) Σ_k J_k` at a single point.
    pub fn average_grad(&self, w: ArrayView1<T>) -> Array1<T> {
        let mut acc = Array1::zeros(self.dim);
        let mut g = Array1::zeros(self.dim);
        for k in 0..self.k() {
            self.grad_into(k, w, g.view_mut());
            acc += &g;
        }
        acc.mapv_inplace(|v| v / T::of_usize(self.k()));
        acc
    }

    pub fn average_eval(&self, w: ArrayView1<T>) -> T {
        (0..self.k()).fold(T::zero(), |acc, k| acc + self.eval(k, w)) / T::of_usize(self.k())
    }
}

/// `J_k(w) = eta/2 ‖w‖²` for every agent.
pub fn quadratic_cost<T: Scalar>(eta: T, k: usize, dim: usize) -> Result<SmoothCostSet<T>> {
    if eta <= T::zero() {
        return Err(Error::Domain("eta must be positive".into()));
    }
    if k == 0 || dim == 0 {
        return Err(Error::InvalidSize(format!("need K >= 1 and M >= 1, got K={k}, M={dim}")));
    }
    Ok(SmoothCostSet { agents: vec![AgentCost::Ridge { eta }; k], dim, nu: eta, delta: eta, family: CostFamily::Quadratic })
}

/// General quadratics `½ wᵀH_k w − g_kᵀw + c_k`; ν and δ are the extreme
/// eigenvalues over all `H_k`.
pub fn quadratic_forms<T: Scalar>(terms: Vec<(Array2<T>, Array1<T>, T)>) -> Result<SmoothCostSet<T>> {
    let Some((h0, _, _)) = terms.first() else {
        return Err(Error::InvalidSize("no agents".into()));
    };
    let dim = h0.nrows();
    let mut nu = T::infinity();
    let mut delta = T::zero();
    let mut agents = Vec::with_capacity(terms.len());
    for (h, g, c) in terms {
        if h.dim() != (dim, dim) || g.len() != dim {
            return Err(Error::Shape(format!("quadratic term shapes {:?}, {} for M={dim}", h.dim(), g.len())));
        }
        let eig = symmetric_eigenvalues(h.view());
        nu = nu.min(eig[0]);
        delta = delta.max(eig[dim - 1]);
        agents.push(AgentCost::Quadratic { h, g, c });
    }
    if nu <= T::zero() {
        return Err(Error::Domain("quadratic costs are not strongly convex".into()));
    }
    Ok(SmoothCostSet { agents, dim, nu, delta, family: CostFamily::Quadratic })
}

/// Regularized least squares `(1/2L_k)‖X_k w − y_k‖² + λ/2 ‖w‖²`.
pub fn least_squares_cost<T: Scalar>(shards: &[(Array2<T>, Array1<T>)], lambda: T) -> Result<SmoothCostSet<T>> {
    if lambda <= T::zero() {
        return Err(Error::Domain("lambda must be positive".into()));
    }
    let mut terms = Vec::with_capacity(shards.len());
    for (x, y) in shards {
        if x.nrows() == 0 {
            return Err(Error::InvalidData("empty shard".into()));
        }
        if x.nrows() != y.len() {
            return Err(Error::Shape(format!("{} rows but {} targets", x.nrows(), y.len())));
        }
        let l = T::of_usize(x.nrows());
        let mut h = x.t().dot(x).mapv(|v| v / l);
        h.diag_mut().mapv_inplace(|v| v + lambda);
        let g = x.t().dot(y).mapv(|v| v / l);
        let c = y.dot(y) / (T::lit(2.0) * l);
        terms.push((h, g, c));
    }
    quadratic_forms(terms)
}

/// Per-agent ℓ2-regularized logistic loss. δ uses the ¼ sigmoid curvature
/// bound, ν the ridge term only.
pub fn logistic_cost<T: Scalar>(shards: &[Dataset], lambda: T) -> Result<SmoothCostSet<T>> {
    if lambda <= T::zero() {
        return Err(Error::Domain("lambda must be positive".into()));
    }
    let Some(first) = shards.first() else {
        return Err(Error::InvalidSize("no agents".into()));
    };
    let dim = first.dim;
    let mut agents = Vec::with_capacity(shards.len());
    let mut curvature = T::zero();
    for (k, shard) in shards.iter().enumerate() {
        if shard.is_empty() {
            return Err(Error::InvalidData(format!("agent {k} has an empty shard")));
        }
        if shard.dim != dim {
            return Err(Error::Shape(format!("agent {k} has dimension {} instead of {dim}", shard.dim)));
        }
        let data = SparseRows::from_dataset(shard);
        let gram = data.gram_norm(dim);
        curvature = curvature.max(gram / (T::lit(4.0) * T::of_usize(shard.len())));
        agents.push(AgentCost::Logistic { data, lambda });
    }
    Ok(SmoothCostSet { agents, dim, nu: lambda, delta: lambda + curvature, family: CostFamily::Logistic })
}

/// `(ν, δ)` recorded when the cost set was built.
pub fn estimate_constants<T: Scalar>(costs: &SmoothCostSet<T>) -> Result<(T, T)> {
    match costs.family {
        CostFamily::Quadratic | CostFamily::Logistic => Ok((costs.nu, costs.delta)),
        CostFamily::Custom => Err(Error::Unsupported("constants are only known for quadratic and logistic costs".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn ridge_examples() {
        let c = quadratic_cost(1.0, 3, 2).unwrap();
        let w = array![2.0, 0.0];
        assert_eq!(c.eval(0, w.view()), 2.0);
        assert_eq!(c.grad(1, w.view()), array![2.0, 0.0]);
        assert_eq!(c.grad(2, array![0.0, 0.0].view()), array![0.0, 0.0]);
        assert_eq!(estimate_constants(&quadratic_cost(3.0, 1, 1).unwrap()).unwrap(), (3.0, 3.0));
        assert!(quadratic_cost(0.0, 1, 1).is_err());
    }

    #[test]
    fn logistic_at_origin() {
        let d = Dataset::new(vec![Sample { features: vec![(0, 1.0)], label: 1.0 }], 3).unwrap();
        let c = logistic_cost(&[d], 0.1).unwrap();
        let z = Array1::zeros(3);
        assert!((c.eval(0, z.view()) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(c.grad(0, z.view()), array![-0.5, 0.0, 0.0]);
    }

    #[test]
    fn logistic_single_basis_sample_constants() {
        let d = Dataset::new(vec![Sample { features: vec![(0, 1.0)], label: -1.0 }], 2).unwrap();
        let (nu, delta) = estimate_constants(&logistic_cost(&[d], 0.01f64).unwrap()).unwrap();
        assert_eq!(nu, 0.01);
        assert!((delta - 0.26).abs() < 1e-12);
    }

    #[test]
    fn logistic_rejects_empty_shard() {
        let empty = Dataset { samples: vec![], dim: 2 };
        assert!(matches!(logistic_cost::<f64>(&[empty], 0.1), Err(Error::InvalidData(_))));
    }

    #[test]
    fn partition_sizes() {
        let d = synthetic_classification(101, 3, 0.1, 0);
        let shards = partition_data(&d, 20, 5).unwrap();
        let mut sizes: Vec<_> = shards.iter().map(Dataset::len).collect();
        sizes.sort();
        assert_eq!(sizes[19], 6);
        assert!(sizes[..19].iter().all(|&s| s == 5));
        assert_eq!(shards, partition_data(&d, 20, 5).unwrap());
        let even = partition_data(&synthetic_classification(100, 3, 0.1, 0), 20, 1).unwrap();
        assert!(even.iter().all(|s| s.len() == 5));
        assert!(matches!(partition_data(&d, 200, 0), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn least_squares_matches_formula() {
        let x = array![[1.0f64, 2.0], [0.5, -1.0], [3.0, 0.0]];
        let y = array![1.0f64, -2.0, 0.5];
        let c = least_squares_cost(&[(x.clone(), y.clone())], 0.2).unwrap();
        let w = array![0.3f64, -0.7];
        let r = x.dot(&w) - &y;
        let want = r.dot(&r) / 6.0 + 0.1 * w.dot(&w);
        assert!((c.eval(0, w.view()) - want).abs() < 1e-14);
        let g = x.t().dot(&r) / 3.0 + &w * 0.2;
        assert!((c.grad(0, w.view()) - g).iter().all(|v| v.abs() < 1e-14));
    }
}
