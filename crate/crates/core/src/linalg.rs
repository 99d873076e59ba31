//! Small dense helpers for the K×K consensus matrices.
//!
//! Network matrices are tiny (K is the number of agents), so a cyclic Jacobi
//! sweep is plenty and keeps everything generic over [`Scalar`].

use ndarray::{Array1, Array2, ArrayView2};

use crate::scalar::Scalar;

pub fn identity<T: Scalar>(k: usize) -> Array2<T> {
    Array2::eye(k)
}

/// Largest absolute asymmetry `max |a_ij - a_ji|`.
pub fn asymmetry<T: Scalar>(a: ArrayView2<T>) -> T {
    let n = a.nrows();
    let mut worst = T::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[[i, j]] - a[[j, i]]).abs());
        }
    }
    worst
}

pub fn frobenius<T: Scalar>(a: ArrayView2<T>) -> T {
    a.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt()
}

/// Eigenvalues of a symmetric matrix, sorted ascending.
///
/// Cyclic Jacobi rotations until the off-diagonal mass drops below machine
/// precision relative to the full Frobenius norm. Only the upper triangle's
/// mirror image matters; callers check symmetry beforehand.
pub fn symmetric_eigenvalues<T: Scalar>(a: ArrayView2<T>) -> Vec<T> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "square matrix required");
    let mut m = a.to_owned();
    let total = frobenius(m.view());
    if total == T::zero() {
        return vec![T::zero(); n];
    }
    let eps = T::epsilon();
    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off + m[[p, q]] * m[[p, q]];
            }
        }
        if off.sqrt() <= eps * total {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (T::lit(2.0) * apq);
                let t = if theta.abs() > T::lit(1e150) {
                    T::one() / (T::lit(2.0) * theta)
                } else {
                    let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                    sign / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eig: Vec<T> = (0..n).map(|i| m[[i, i]]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    eig
}

/// Row sums of a matrix.
pub fn row_sums<T: Scalar>(a: ArrayView2<T>) -> Array1<T> {
    a.rows().into_iter().map(|r| r.sum()).collect()
}

/// `a * b` for K×K by K×M blocks, written out so the reduction order over
/// agents is fixed regardless of the backing BLAS-like kernel.
pub fn combine<T: Scalar>(a: ArrayView2<T>, w: ArrayView2<T>) -> Array2<T> {
    let (k, m) = (a.nrows(), w.ncols());
    let mut out = Array2::zeros((k, m));
    for i in 0..k {
        let mut row = out.row_mut(i);
        for s in 0..a.ncols() {
            let weight = a[[i, s]];
            if weight != T::zero() {
                row.scaled_add(weight, &w.row(s));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn eigenvalues_of_diagonal() {
        let a = array![[3.0, 0.0], [0.0, -1.0]];
        assert_eq!(symmetric_eigenvalues(a.view()), vec![-1.0, 3.0]);
    }

    #[test]
    fn eigenvalues_of_two_by_two() {
        let a = array![[0.25f64, 0.75], [0.75, 0.25]];
        let e = symmetric_eigenvalues(a.view());
        assert!((e[0] + 0.5).abs() < 1e-15);
        assert!((e[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn combine_matches_dot() {
        let a = array![[0.5f64, 0.5, 0.0], [0.5, 0.25, 0.25], [0.0, 0.25, 0.75]];
        let w = array![[1.0, 2.0], [3.0, -1.0], [0.5, 4.0]];
        let got = combine(a.view(), w.view());
        let want = a.dot(&w);
        for (g, e) in got.iter().zip(want.iter()) {
            assert!((g - e).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_matrix_has_zero_spectrum() {
        let a = Array2::<f64>::zeros((3, 3));
        assert_eq!(symmetric_eigenvalues(a.view()), vec![0.0; 3]);
    }
}
