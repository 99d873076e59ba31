//! Network graphs, combination matrices and the consensus triples that
//! parameterize the unified primal-dual recursion.
//!
//! All consensus matrices are K×K and act on K×M stacked iterates (one row per
//! agent); the KM×KM Kronecker lifts are never formed.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{asymmetry, identity, row_sums, symmetric_eigenvalues};
use crate::scalar::Scalar;

/// Graph families understood by [`build_graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Ring,
    Grid,
    Complete,
    RandomConnected,
}

impl FromStr for GraphKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ring" => Ok(GraphKind::Ring),
            "grid" => Ok(GraphKind::Grid),
            "complete" => Ok(GraphKind::Complete),
            "random_connected" => Ok(GraphKind::RandomConnected),
            other => Err(Error::InvalidData(format!("unknown graph kind `{other}`"))),
        }
    }
}

/// Static undirected connected graph over agents `0..k`.
///
/// Edges are stored as ordered pairs `(s, k)` with `s < k`; self-loops are
/// never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    k: usize,
    edges: BTreeSet<(usize, usize)>,
    seed: u64,
}

impl Graph {
    /// Builds a graph from 0-indexed edges, rejecting self-loops,
    /// out-of-range endpoints and disconnected inputs.
    pub fn from_edges(k: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidSize(format!("need at least 2 agents, got {k}")));
        }
        let mut set = BTreeSet::new();
        for (s, t) in edges {
            if s == t {
                return Err(Error::InvalidData(format!("self-loop at agent {}", s + 1)));
            }
            if s >= k || t >= k {
                return Err(Error::InvalidData(format!(
                    "edge ({}, {}) outside 1..={k}",
                    s + 1,
                    t + 1
                )));
            }
            set.insert((s.min(t), s.max(t)));
        }
        let g = Graph { k, edges: set, seed: 0 };
        if !g.is_connected() {
            return Err(Error::InvalidData("graph is not connected".into()));
        }
        Ok(g)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, s: usize, t: usize) -> bool {
        self.edges.contains(&(s.min(t), s.max(t)))
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.k];
        for &(s, t) in &self.edges {
            d[s] += 1;
            d[t] += 1;
        }
        d
    }

    pub fn neighbors(&self, node: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(s, t)| match () {
                _ if s == node => Some(t),
                _ if t == node => Some(s),
                _ => None,
            })
            .collect()
    }

    /// Breadth-first reachability from agent 0.
    pub fn is_connected(&self) -> bool {
        let mut adj = vec![Vec::new(); self.k];
        for &(s, t) in &self.edges {
            adj[s].push(t);
            adj[t].push(s);
        }
        let mut seen = vec![false; self.k];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Edge-list text: header `K <count>` then one 1-indexed `s k` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("K {}\n", self.k);
        for &(s, t) in &self.edges {
            out.push_str(&format!("{} {}\n", s + 1, t + 1));
        }
        out
    }

    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing `K <count>` header".into(),
        })?;
        let k = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["K", n] => n.parse::<usize>().map_err(|e| Error::Parse {
                line: hline,
                msg: format!("bad agent count: {e}"),
            })?,
            _ => {
                return Err(Error::Parse {
                    line: hline,
                    msg: format!("expected `K <count>`, got `{header}`"),
                })
            }
        };
        let mut edges = Vec::new();
        for (line, l) in lines {
            let parts: Vec<_> = l.split_whitespace().collect();
            let [s, t] = parts.as_slice() else {
                return Err(Error::Parse { line, msg: format!("expected `s k`, got `{l}`") });
            };
            let parse = |v: &str| -> Result<usize> {
                match v.parse::<usize>() {
                    Ok(0) | Err(_) => Err(Error::Parse {
                        line,
                        msg: format!("bad 1-indexed agent id `{v}`"),
                    }),
                    Ok(n) => Ok(n - 1),
                }
            };
            edges.push((parse(s)?, parse(t)?));
        }
        Graph::from_edges(k, edges)
    }
}

/// Builds a connected graph of the requested family.
///
/// `extra_edge_prob` only affects [`GraphKind::RandomConnected`], which draws
/// a uniform random spanning tree (Prüfer decoding) and then adds every
/// remaining pair independently with that probability.
pub fn build_graph(kind: GraphKind, k: usize, seed: u64, extra_edge_prob: f64) -> Result<Graph> {
    if k < 2 {
        return Err(Error::InvalidSize(format!("need at least 2 agents, got {k}")));
    }
    if !(0.0..=1.0).contains(&extra_edge_prob) {
        return Err(Error::Domain(format!(
            "extra_edge_prob must lie in [0, 1], got {extra_edge_prob}"
        )));
    }
    let mut edges = BTreeSet::new();
    match kind {
        GraphKind::Ring => {
            for i in 0..k {
                let j = (i + 1) % k;
                edges.insert((i.min(j), i.max(j)));
            }
        }
        GraphKind::Grid => {
            let width = (k as f64).sqrt().ceil() as usize;
            for i in 0..k {
                if (i + 1) % width != 0 && i + 1 < k {
                    edges.insert((i, i + 1));
                }
                if i + width < k {
                    edges.insert((i, i + width));
                }
            }
        }
        GraphKind::Complete => {
            for s in 0..k {
                for t in (s + 1)..k {
                    edges.insert((s, t));
                }
            }
        }
        GraphKind::RandomConnected => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for e in random_spanning_tree(k, &mut rng) {
                edges.insert(e);
            }
            for s in 0..k {
                for t in (s + 1)..k {
                    // one draw per pair keeps the stream layout independent of the tree
                    let draw: f64 = rng.random();
                    if draw < extra_edge_prob {
                        edges.insert((s, t));
                    }
                }
            }
        }
    }
    let g = Graph { k, edges, seed };
    debug_assert!(g.is_connected());
    Ok(g)
}

fn random_spanning_tree(k: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    if k == 2 {
        return vec![(0, 1)];
    }
    let prufer: Vec<usize> = (0..k - 2).map(|_| rng.random_range(0..k)).collect();
    let mut degree = vec![1usize; k];
    for &v in &prufer {
        degree[v] += 1;
    }
    let mut edges = Vec::with_capacity(k - 1);
    for &v in &prufer {
        let leaf = (0..k).find(|&u| degree[u] == 1).expect("Prüfer decoding always has a leaf");
        edges.push((leaf.min(v), leaf.max(v)));
        degree[leaf] -= 1;
        degree[v] -= 1;
    }
    let rest: Vec<usize> = (0..k).filter(|&u| degree[u] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

/// Symmetric doubly stochastic matrix `A = [a_sk]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationMatrix<T> {
    a: Array2<T>,
}

impl<T: Scalar> CombinationMatrix<T> {
    /// Validates symmetry and unit row/column sums.
    pub fn new(a: Array2<T>) -> Result<Self> {
        let k = a.nrows();
        if k == 0 || a.ncols() != k {
            return Err(Error::MalformedMatrix(format!("expected square matrix, got {:?}", a.dim())));
        }
        let tol = T::lit(1e-12).max(T::of_usize(8 * k) * T::epsilon());
        if asymmetry(a.view()) > tol {
            return Err(Error::MalformedMatrix("combination matrix is not symmetric".into()));
        }
        if row_sums(a.view()).iter().any(|&s| (s - T::one()).abs() > tol) {
            return Err(Error::MalformedMatrix("rows of combination matrix do not sum to 1".into()));
        }
        Ok(CombinationMatrix { a })
    }

    pub fn k(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> &Array2<T> {
        &self.a
    }

    pub fn view(&self) -> ArrayView2<'_, T> {
        self.a.view()
    }

    pub fn into_inner(self) -> Array2<T> {
        self.a
    }

    /// True when every off-diagonal nonzero sits on an edge of `g`.
    pub fn respects(&self, g: &Graph) -> bool {
        let k = self.k();
        k == g.k()
            && (0..k).all(|s| (0..k).all(|t| s == t || self.a[[s, t]] == T::zero() || g.has_edge(s, t)))
    }

    /// Second-largest eigenvalue.
    pub fn lambda2(&self) -> T {
        second_largest(&self.a)
    }
}

fn second_largest<T: Scalar>(a: &Array2<T>) -> T {
    let eig = symmetric_eigenvalues(a.view());
    if eig.len() < 2 {
        eig[0]
    } else {
        eig[eig.len() - 2]
    }
}

/// Metropolis weights: `a_sk = 1/(1 + max(d_s, d_k))` on edges, diagonal
/// filled so each row sums to one.
pub fn metropolis_matrix<T: Scalar>(g: &Graph) -> CombinationMatrix<T> {
    let k = g.k();
    let d = g.degrees();
    let mut a = Array2::<T>::zeros((k, k));
    for (s, t) in g.edges() {
        let w = T::one() / T::of_usize(1 + d[s].max(d[t]));
        a[[s, t]] = w;
        a[[t, s]] = w;
    }
    for i in 0..k {
        let off = (0..k).filter(|&j| j != i).fold(T::zero(), |acc, j| acc + a[[i, j]]);
        a[[i, i]] = T::one() - off;
    }
    CombinationMatrix { a }
}

/// `0.5 (I + A)`: maps the spectrum of `A` from `[-1, 1]` into `[0, 1]`.
pub fn shift_positive<T: Scalar>(a: &CombinationMatrix<T>) -> CombinationMatrix<T> {
    let half = T::lit(0.5);
    let shifted = (identity::<T>(a.k()) + &a.a).mapv(|v| v * half);
    CombinationMatrix { a: shifted }
}

/// Graph Laplacian `D - Adj`; row `k` of `L W` is `sum_{s in N_k} (w_k - w_s)`.
pub fn laplacian_matrix<T: Scalar>(g: &Graph) -> Array2<T> {
    let k = g.k();
    let mut l = Array2::<T>::zeros((k, k));
    for (s, t) in g.edges() {
        l[[s, t]] = -T::one();
        l[[t, s]] = -T::one();
        l[[s, s]] += T::one();
        l[[t, t]] += T::one();
    }
    l
}

/// Algorithms recovered by a specific choice of `(Ā, B², C)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AlgorithmId {
    ExactDiffusion,
    Nids,
    AugDgm,
    AtcTracking,
    Diging,
    Extra,
    Dlm,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 7] = [
        AlgorithmId::ExactDiffusion,
        AlgorithmId::Nids,
        AlgorithmId::AugDgm,
        AlgorithmId::AtcTracking,
        AlgorithmId::Diging,
        AlgorithmId::Extra,
        AlgorithmId::Dlm,
    ];

    /// Adapt-then-combine members use `Ā ≠ I`.
    pub fn is_atc(self) -> bool {
        matches!(
            self,
            AlgorithmId::ExactDiffusion | AlgorithmId::Nids | AlgorithmId::AugDgm | AlgorithmId::AtcTracking
        )
    }

    /// Combination rounds per iteration of the classical implementation.
    pub fn comm_rounds_per_iter(self) -> usize {
        match self {
            AlgorithmId::AugDgm | AlgorithmId::AtcTracking | AlgorithmId::Diging => 2,
            AlgorithmId::ExactDiffusion | AlgorithmId::Nids | AlgorithmId::Extra | AlgorithmId::Dlm => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmId::ExactDiffusion => "ExactDiffusion",
            AlgorithmId::Nids => "NIDS",
            AlgorithmId::AugDgm => "AugDGM",
            AlgorithmId::AtcTracking => "ATCTracking",
            AlgorithmId::Diging => "DIGing",
            AlgorithmId::Extra => "EXTRA",
            AlgorithmId::Dlm => "DLM",
        }
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AlgorithmId::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnsupportedAlgorithm(s.to_string()))
    }
}

/// The `(Ā, B², C)` matrices parameterizing the framework.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusTriple<T> {
    pub a_bar: Array2<T>,
    pub b_sq: Array2<T>,
    pub c: Array2<T>,
    pub algorithm: Option<AlgorithmId>,
    /// Combination matrix the triple was derived from, when there is one.
    pub source: Option<Array2<T>>,
}

impl<T: Scalar> ConsensusTriple<T> {
    pub fn new(a_bar: Array2<T>, b_sq: Array2<T>, c: Array2<T>) -> Result<Self> {
        let k = a_bar.nrows();
        for (name, m) in [("A_bar", &a_bar), ("B_sq", &b_sq), ("C", &c)] {
            if m.dim() != (k, k) {
                return Err(Error::MalformedMatrix(format!("{name} has shape {:?}, expected ({k}, {k})", m.dim())));
            }
        }
        Ok(ConsensusTriple { a_bar, b_sq, c, algorithm: None, source: None })
    }

    pub fn k(&self) -> usize {
        self.a_bar.nrows()
    }

    pub fn with_source(mut self, a: &CombinationMatrix<T>) -> Self {
        self.source = Some(a.matrix().clone());
        self
    }

    /// Combination rounds per iteration; unknown triples count as two.
    pub fn comm_rounds_per_iter(&self) -> usize {
        self.algorithm.map_or(2, AlgorithmId::comm_rounds_per_iter)
    }
}

/// Returns the `(Ā, B², C)` triple for `id`.
///
/// `c` is used by NIDS and DLM; `mu` and `laplacian` only by DLM
/// (`B² = C = c μ L`).
pub fn table1_matrices<T: Scalar>(
    id: AlgorithmId,
    a: &CombinationMatrix<T>,
    c: T,
    mu: T,
    laplacian: Option<&Array2<T>>,
) -> Result<ConsensusTriple<T>> {
    let k = a.k();
    let i = identity::<T>(k);
    let am = a.matrix();
    let i_minus_a = &i - am;
    let half = T::lit(0.5);
    let zero = Array2::<T>::zeros((k, k));
    let (a_bar, b_sq, cm) = match id {
        AlgorithmId::ExactDiffusion => ((&i + am).mapv(|v| v * half), i_minus_a.mapv(|v| v * half), zero),
        AlgorithmId::Nids => {
            if c <= T::zero() {
                return Err(Error::Domain("NIDS requires c > 0".into()));
            }
            let b_sq = i_minus_a.mapv(|v| v * c);
            (&i - &b_sq, b_sq, zero)
        }
        AlgorithmId::AugDgm => (am.dot(am), i_minus_a.dot(&i_minus_a), zero),
        AlgorithmId::AtcTracking => (am.clone(), i_minus_a.dot(&i_minus_a), i_minus_a.clone()),
        AlgorithmId::Diging => (i.clone(), i_minus_a.dot(&i_minus_a), &i - &am.dot(am)),
        AlgorithmId::Extra => {
            let h = i_minus_a.mapv(|v| v * half);
            (i.clone(), h.clone(), h)
        }
        AlgorithmId::Dlm => {
            if c <= T::zero() || mu <= T::zero() {
                return Err(Error::Domain("DLM requires c > 0 and mu > 0".into()));
            }
            let l = laplacian.ok_or_else(|| Error::Domain("DLM requires the graph Laplacian".into()))?;
            if l.dim() != (k, k) {
                return Err(Error::Shape(format!("Laplacian has shape {:?}, expected ({k}, {k})", l.dim())));
            }
            let scaled = l.mapv(|v| v * c * mu);
            (i.clone(), scaled.clone(), scaled)
        }
    };
    let mut t = ConsensusTriple::new(a_bar, b_sq, cm)?.with_source(a);
    t.algorithm = Some(id);
    Ok(t)
}

/// Numerical thresholds for [`validate_assumptions_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances<T> {
    /// Smallest eigenvalue accepted as PSD is `-psd`.
    pub psd: T,
    /// Relative cutoff below which an eigenvalue counts as zero.
    pub nullspace: T,
    /// Margin for the strict upper bounds `C < 2I` and `C < I`.
    pub strict: T,
}

impl<T: Scalar> Default for Tolerances<T> {
    fn default() -> Self {
        Tolerances { psd: T::lit(1e-10), nullspace: T::lit(1e-10), strict: T::lit(1e-10) }
    }
}

/// Per-condition diagnostics behind a [`SpectralReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDiagnostics<T> {
    pub eig_b_sq: Vec<T>,
    pub eig_c: Vec<T>,
    /// Smallest eigenvalue of `I - B² - Ā²`.
    pub min_eig_gap: T,
    /// Smallest eigenvalue of `C - B²`.
    pub min_eig_c_minus_b_sq: T,
    pub b_sq_nullity: usize,
    pub c_nullity: usize,
    /// Null spaces of `B²` (and of `C` unless `C = 0`) equal `span(1)`.
    pub consensus_ok: bool,
    pub messages: Vec<String>,
}

/// Spectral quantities entering the rate theorems.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport<T> {
    pub sigma_max_c: T,
    pub sigma_min_b_sq: T,
    pub lambda2_a: Option<T>,
    pub assumption2_ok: bool,
    pub assumption4_ok: bool,
    pub diagnostics: SpectralDiagnostics<T>,
}

pub fn validate_assumptions<T: Scalar>(t: &ConsensusTriple<T>) -> Result<SpectralReport<T>> {
    validate_assumptions_with(t, Tolerances::default())
}

pub fn validate_assumptions_with<T: Scalar>(
    t: &ConsensusTriple<T>,
    tol: Tolerances<T>,
) -> Result<SpectralReport<T>> {
    let k = t.k();
    let sym_tol = T::lit(1e-12).max(T::of_usize(8 * k) * T::epsilon());
    for (name, m) in [("A_bar", &t.a_bar), ("B_sq", &t.b_sq), ("C", &t.c)] {
        if asymmetry(m.view()) > sym_tol {
            return Err(Error::MalformedMatrix(format!("{name} is not symmetric")));
        }
    }
    let eig_b = symmetric_eigenvalues(t.b_sq.view());
    let eig_c = symmetric_eigenvalues(t.c.view());
    let i = identity::<T>(k);
    let gap = &i - &t.b_sq - t.a_bar.dot(&t.a_bar);
    let min_eig_gap = symmetric_eigenvalues(gap.view())[0];
    let min_eig_cb = symmetric_eigenvalues((&t.c - &t.b_sq).view())[0];

    let abs_max = |e: &[T]| e.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    let sigma_max_b = abs_max(&eig_b);
    let sigma_max_c = abs_max(&eig_c);
    let b_cut = tol.nullspace * T::one().max(sigma_max_b);
    let c_cut = tol.nullspace * T::one().max(sigma_max_c);
    let b_nullity = eig_b.iter().filter(|v| v.abs() <= b_cut).count();
    let c_nullity = eig_c.iter().filter(|v| v.abs() <= c_cut).count();
    let sigma_min_b_sq = if k == 1 {
        // a single agent has no disagreement subspace
        T::one()
    } else {
        eig_b
            .iter()
            .map(|v| v.abs())
            .filter(|&v| v > b_cut)
            .fold(None, |acc: Option<T>, v| Some(acc.map_or(v, |a| a.min(v))))
            .unwrap_or(T::zero())
    };

    let ones = Array1::<T>::ones(k);
    let annihilates = |m: &Array2<T>, cut: T| {
        m.dot(&ones).iter().fold(T::zero(), |acc, v| acc.max(v.abs())) <= cut.max(sym_tol)
    };
    let mut messages = Vec::new();
    let b_null_ok = b_nullity == 1 && annihilates(&t.b_sq, b_cut);
    if !b_null_ok {
        messages.push(format!("null(B²) != span(1): nullity {b_nullity}"));
    }
    let c_is_zero = sigma_max_c <= c_cut;
    let c_null_ok = c_nullity == 1 && annihilates(&t.c, c_cut);
    if !c_is_zero && !c_null_ok {
        messages.push(format!("null(C) != span(1): nullity {c_nullity}"));
    }
    let consensus_ok = b_null_ok && (c_is_zero || c_null_ok);

    let gap_ok = min_eig_gap >= -tol.psd;
    if !gap_ok {
        messages.push(format!("I - B² - Ā² not PSD: min eigenvalue {min_eig_gap:e}"));
    }
    let c_min = eig_c[0];
    let c_max = eig_c[k - 1];
    let c_lower_ok = c_min >= -tol.psd;
    if !c_lower_ok {
        messages.push(format!("C not PSD: min eigenvalue {c_min:e}"));
    }
    let c_below_two = c_max <= T::lit(2.0) - tol.strict;
    if !c_below_two {
        messages.push(format!("C < 2I violated: max eigenvalue {c_max:e}"));
    }
    let assumption2_ok = consensus_ok && gap_ok && c_lower_ok && c_below_two;

    let cb_ok = min_eig_cb >= -tol.psd;
    let b_psd = eig_b[0] >= -tol.psd;
    let c_below_one = c_max <= T::one() - tol.strict;
    let assumption4_ok = b_null_ok && c_null_ok && cb_ok && b_psd && c_lower_ok && c_below_one;
    if !cb_ok {
        messages.push(format!("C - B² not PSD: min eigenvalue {min_eig_cb:e}"));
    }
    if !c_below_one {
        messages.push(format!("C < I violated: max eigenvalue {c_max:e}"));
    }

    Ok(SpectralReport {
        sigma_max_c,
        sigma_min_b_sq,
        lambda2_a: t.source.as_ref().map(second_largest),
        assumption2_ok,
        assumption4_ok,
        diagnostics: SpectralDiagnostics {
            eig_b_sq: eig_b,
            eig_c,
            min_eig_gap,
            min_eig_c_minus_b_sq: min_eig_cb,
            b_sq_nullity: b_nullity,
            c_nullity,
            consensus_ok,
            messages,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn close(a: &Array2<f64>, b: &Array2<f64>, tol: f64) -> bool {
        a.dim() == b.dim() && a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn complete_two_is_single_edge() {
        for seed in [0, 1, 99] {
            let g = build_graph(GraphKind::Complete, 2, seed, 0.0).unwrap();
            assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1)]);
        }
    }

    #[test]
    fn ring_of_four() {
        let g = build_graph(GraphKind::Ring, 4, 0, 0.0).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (0, 3), (1, 2), (2, 3)]);
    }

    #[test]
    fn random_connected_graph() {
        let g = build_graph(GraphKind::RandomConnected, 20, 7, 0.2).unwrap();
        assert!(g.is_connected());
        assert!(g.edge_count() >= 19);
        assert_eq!(g, build_graph(GraphKind::RandomConnected, 20, 7, 0.2).unwrap());
    }

    #[test]
    fn grid_is_connected() {
        for k in 2..30 {
            assert!(build_graph(GraphKind::Grid, k, 0, 0.0).unwrap().is_connected(), "k={k}");
        }
    }

    #[test]
    fn rejects_single_agent_and_bad_probability() {
        assert!(matches!(build_graph(GraphKind::Ring, 1, 0, 0.0), Err(Error::InvalidSize(_))));
        assert!(build_graph(GraphKind::RandomConnected, 5, 0, 1.5).is_err());
    }

    #[test]
    fn metropolis_hand_cases() {
        let pair = Graph::from_edges(2, [(0, 1)]).unwrap();
        assert!(close(metropolis_matrix::<f64>(&pair).matrix(), &array![[0.5, 0.5], [0.5, 0.5]], 0.0));

        let third = 1.0 / 3.0;
        let tri = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        assert!(close(metropolis_matrix::<f64>(&tri).matrix(), &Array2::from_elem((3, 3), third), 1e-15));

        let star = Graph::from_edges(3, [(0, 1), (0, 2)]).unwrap();
        let want = array![[third, third, third], [third, 2.0 * third, 0.0], [third, 0.0, 2.0 * third]];
        assert!(close(metropolis_matrix::<f64>(&star).matrix(), &want, 1e-15));
    }

    #[test]
    fn shift_positive_cases() {
        let i = CombinationMatrix::new(identity::<f64>(3)).unwrap();
        assert_eq!(shift_positive(&i), i);
        let swap = CombinationMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(close(shift_positive(&swap).matrix(), &array![[0.5, 0.5], [0.5, 0.5]], 0.0));
        // eigenvalue -0.4 maps to 0.3
        let a = CombinationMatrix::new(array![[0.3f64, 0.7], [0.7, 0.3]]).unwrap();
        let e = symmetric_eigenvalues(shift_positive(&a).view());
        assert!((e[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn laplacian_cases() {
        let pair = Graph::from_edges(2, [(0, 1)]).unwrap();
        assert_eq!(laplacian_matrix::<f64>(&pair), array![[1.0, -1.0], [-1.0, 1.0]]);
        let tri = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let l = laplacian_matrix::<f64>(&tri);
        for s in 0..3 {
            for t in 0..3 {
                assert_eq!(l[[s, t]], if s == t { 2.0 } else { -1.0 });
            }
        }
        let ring = build_graph(GraphKind::Ring, 4, 0, 0.0).unwrap();
        assert!(row_sums(laplacian_matrix::<f64>(&ring).view()).iter().all(|&s| s == 0.0));
    }

    #[test]
    fn table1_rows() {
        let g = build_graph(GraphKind::Ring, 5, 0, 0.0).unwrap();
        let a = metropolis_matrix::<f64>(&g);
        let am = a.matrix();
        let i = identity::<f64>(5);
        let zero = Array2::<f64>::zeros((5, 5));

        let ed = table1_matrices(AlgorithmId::ExactDiffusion, &a, 0.0, 0.0, None).unwrap();
        assert!(close(&ed.a_bar, &((&i + am) * 0.5), 0.0));
        assert!(close(&ed.b_sq, &((&i - am) * 0.5), 0.0));
        assert!(close(&ed.c, &zero, 0.0));

        let ex = table1_matrices(AlgorithmId::Extra, &a, 0.0, 0.0, None).unwrap();
        assert!(close(&ex.a_bar, &i, 0.0));
        assert!(close(&ex.b_sq, &((&i - am) * 0.5), 0.0));
        assert!(close(&ex.c, &((&i - am) * 0.5), 0.0));

        let aug = table1_matrices(AlgorithmId::AugDgm, &a, 0.0, 0.0, None).unwrap();
        let ima = &i - am;
        assert!(close(&aug.a_bar, &am.dot(am), 1e-15));
        assert!(close(&aug.b_sq, &ima.dot(&ima), 1e-15));
        assert!(close(&aug.c, &zero, 0.0));

        assert!(table1_matrices(AlgorithmId::Nids, &a, 0.0, 0.0, None).is_err());
        assert!(table1_matrices(AlgorithmId::Dlm, &a, 1.0, 0.1, None).is_err());
        assert!(matches!("Bogus".parse::<AlgorithmId>(), Err(Error::UnsupportedAlgorithm(_))));
    }

    #[test]
    fn every_triple_with_penalty_has_consensus_nullspace() {
        let g = build_graph(GraphKind::RandomConnected, 8, 3, 0.3).unwrap();
        let a = metropolis_matrix::<f64>(&g);
        let l = laplacian_matrix::<f64>(&g);
        for id in AlgorithmId::ALL {
            let t = table1_matrices(id, &a, 0.3, 0.05, Some(&l)).unwrap();
            let r = validate_assumptions(&t).unwrap();
            assert_eq!(r.diagnostics.b_sq_nullity, 1, "{id}");
            if r.sigma_max_c > 0.0 {
                assert_eq!(r.diagnostics.c_nullity, 1, "{id}");
            }
            assert!(r.diagnostics.consensus_ok, "{id}");
        }
    }

    #[test]
    fn exact_diffusion_satisfies_assumption2() {
        for seed in 0..10 {
            let g = build_graph(GraphKind::RandomConnected, 10, seed, 0.2).unwrap();
            let a = metropolis_matrix::<f64>(&g);
            let t = table1_matrices(AlgorithmId::ExactDiffusion, &a, 0.0, 0.0, None).unwrap();
            let r = validate_assumptions(&t).unwrap();
            assert!(r.assumption2_ok, "{:?}", r.diagnostics.messages);
            assert!(r.sigma_min_b_sq > 0.0 && r.sigma_min_b_sq <= 1.0);
            // per-eigenvalue check 0.25(1+l)^2 <= 0.5(1+l)
            for l in symmetric_eigenvalues(a.view()) {
                assert!(0.25 * (1.0 + l).powi(2) <= 0.5 * (1.0 + l) + 1e-12);
            }
        }
    }

    #[test]
    fn aug_dgm_with_negative_eigenvalue_fails_assumption2() {
        let a = CombinationMatrix::new(array![[0.25f64, 0.75], [0.75, 0.25]]).unwrap();
        let t = table1_matrices(AlgorithmId::AugDgm, &a, 0.0, 0.0, None).unwrap();
        let r = validate_assumptions(&t).unwrap();
        assert!(!r.assumption2_ok);
        // λ = -0.5: λ⁴ = 0.0625 against 2λ - λ² = -1.25
        assert!((r.diagnostics.min_eig_gap - (-1.25 - 0.0625)).abs() < 1e-12);
        let shifted = table1_matrices(AlgorithmId::AugDgm, &shift_positive(&a), 0.0, 0.0, None).unwrap();
        assert!(validate_assumptions(&shifted).unwrap().assumption2_ok);
    }

    #[test]
    fn c_at_two_is_rejected() {
        let a_bar = array![[0.5f64, 0.5], [0.5, 0.5]];
        let b_sq = array![[0.25, -0.25], [-0.25, 0.25]];
        let c = array![[1.0, -1.0], [-1.0, 1.0]]; // eigenvalues 0 and 2
        let t = ConsensusTriple::new(a_bar, b_sq, c).unwrap();
        let r = validate_assumptions(&t).unwrap();
        assert!((r.sigma_max_c - 2.0).abs() < 1e-14);
        assert!(!r.assumption2_ok);
    }

    #[test]
    fn non_symmetric_triple_is_malformed() {
        let t = ConsensusTriple::new(array![[1.0, 0.0], [0.1, 1.0]], Array2::zeros((2, 2)), Array2::zeros((2, 2)))
            .unwrap();
        assert!(matches!(validate_assumptions(&t), Err(Error::MalformedMatrix(_))));
    }

    #[test]
    fn extra_satisfies_assumption4() {
        let g = build_graph(GraphKind::RandomConnected, 12, 1, 0.1).unwrap();
        let a = metropolis_matrix::<f64>(&g);
        let t = table1_matrices(AlgorithmId::Extra, &a, 0.0, 0.0, None).unwrap();
        let r = validate_assumptions(&t).unwrap();
        assert!(r.assumption4_ok, "{:?}", r.diagnostics.messages);
        assert!(!r.assumption2_ok, "Ā = I cannot satisfy Ā² ≤ I - B²");
        assert!((r.lambda2_a.unwrap() - a.lambda2()).abs() < 1e-15);
    }

    #[test]
    fn edge_list_round_trip_and_errors() {
        let g = build_graph(GraphKind::RandomConnected, 9, 4, 0.25).unwrap();
        let text = g.to_edge_list();
        assert!(text.starts_with("K 9\n"));
        let back = Graph::parse_edge_list(&text).unwrap();
        assert_eq!(back.edges().collect::<Vec<_>>(), g.edges().collect::<Vec<_>>());

        assert!(matches!(Graph::parse_edge_list("K 3\n1 2\n"), Err(Error::InvalidData(_))));
        assert!(matches!(Graph::parse_edge_list("K 3\n1 x\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(Graph::parse_edge_list("3\n"), Err(Error::Parse { line: 1, .. })));
        assert!(Graph::parse_edge_list("K 2\n1 1\n").is_err());
    }
}
