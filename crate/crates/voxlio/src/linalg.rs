//! Small dense factorizations used by the estimator: diagonally pivoted
//! Cholesky for possibly rank-deficient PSD matrices, and Householder
//! reflections for projecting measurement systems onto the left null space
//! of a tall thin matrix.

use nalgebra::{DMatrix, DVector, Matrix4};
use thiserror::Error;

use crate::geometry::Mat4;

#[derive(Debug, Error)]
pub enum FactorError {
    #[error("matrix is not positive semidefinite (pivot {pivot} at column {column})")]
    NotPositiveSemidefinite { pivot: f64, column: usize },
}

/// In-place symmetrization: `m <- (m + m^T) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Largest absolute asymmetry `max |m_ij - m_ji|`; an audit helper.
pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Smallest eigenvalue of a symmetric matrix; an audit helper.
pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Diagonally pivoted Cholesky factorization of a symmetric PSD 4x4 matrix.
///
/// Returns `(l, rank)` with `l * l^T == c` to working precision. Rows of `l`
/// keep the original ordering, columns follow the pivot order, and the
/// columns at and beyond `rank` are identically zero, so the factor is lower
/// triangular up to a row permutation. Pivots smaller than
/// `tol = 1e-10 * max_diagonal` terminate the factorization; pivots below
/// `-tol` mean the input is indefinite and produce an error.
pub fn pivoted_cholesky4(c: &Mat4) -> Result<(Mat4, usize), FactorError> {
    let mut work = *c;
    let mut l = Matrix4::zeros();
    let mut piv = [0usize, 1, 2, 3];
    let max_diag = (0..4).map(|i| c[(i, i)].abs()).fold(0.0_f64, f64::max);
    let tol = 1e-10 * max_diag.max(f64::MIN_POSITIVE);

    for k in 0..4 {
        // Select the largest remaining diagonal entry as the pivot.
        let mut best = k;
        for j in (k + 1)..4 {
            if work[(piv[j], piv[j])] > work[(piv[best], piv[best])] {
                best = j;
            }
        }
        piv.swap(k, best);
        let pk = piv[k];
        let pivot = work[(pk, pk)];
        if pivot <= tol {
            if pivot < -tol {
                return Err(FactorError::NotPositiveSemidefinite { pivot, column: k });
            }
            return Ok((l, k));
        }
        let root = pivot.sqrt();
        l[(pk, k)] = root;
        for j in (k + 1)..4 {
            let pj = piv[j];
            l[(pj, k)] = work[(pj, pk)] / root;
        }
        // Schur-complement update of the remaining block.
        for a in (k + 1)..4 {
            for b in (k + 1)..4 {
                let (pa, pb) = (piv[a], piv[b]);
                work[(pa, pb)] -= l[(pa, k)] * l[(pb, k)];
            }
        }
    }
    Ok((l, 4))
}

/// Householder reflections bringing a tall matrix `a` (m x n, m >= n) to
/// upper-triangular form. Applying the stacked reflections to another matrix
/// computes `Q^T * x`; the rows at and beyond `rank` of `Q^T * x` then form
/// `N^T * x` for an orthonormal basis `N` of the left null space of `a`.
pub struct LeftNullspace {
    reflectors: Vec<(DVector<f64>, f64)>, // (v, beta) with H = I - beta v v^T
    rows: usize,
    rank: usize,
}

impl LeftNullspace {
    pub fn new(a: &DMatrix<f64>) -> Self {
        let m = a.nrows();
        let n = a.ncols();
        let mut r = a.clone();
        let scale = a.iter().map(|x| x.abs()).fold(0.0_f64, f64::max);
        let tol = 1e-12 * scale.max(f64::MIN_POSITIVE) * (m.max(n) as f64);
        let mut reflectors = Vec::with_capacity(n.min(m));
        let mut rank = 0;

        for k in 0..n.min(m) {
            // Build the reflector annihilating column k below the diagonal.
            let col_norm_sq: f64 = (k..m).map(|i| r[(i, k)] * r[(i, k)]).sum();
            let col_norm = col_norm_sq.sqrt();
            if col_norm <= tol {
                continue; // structurally dependent column; no reflector
            }
            let alpha = if r[(k, k)] >= 0.0 { -col_norm } else { col_norm };
            let mut v = DVector::zeros(m);
            for i in k..m {
                v[i] = r[(i, k)];
            }
            v[k] -= alpha;
            let vtv = v.norm_squared();
            if vtv <= tol * tol {
                rank += 1;
                continue; // column already triangular
            }
            let beta = 2.0 / vtv;
            // Apply to the remaining columns of r.
            for j in k..n {
                let mut dot = 0.0;
                for i in k..m {
                    dot += v[i] * r[(i, j)];
                }
                let f = beta * dot;
                for i in k..m {
                    r[(i, j)] -= f * v[i];
                }
            }
            reflectors.push((v, beta));
            rank += 1;
        }

        LeftNullspace {
            reflectors,
            rows: m,
            rank,
        }
    }

    /// Number of rows the projected system retains (`m - rank`).
    pub fn null_dim(&self) -> usize {
        self.rows - self.rank
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Computes `Q^T x` for a matrix with matching row count.
    pub fn q_transpose_times(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        debug_assert_eq!(x.nrows(), self.rows);
        let mut out = x.clone();
        for (v, beta) in &self.reflectors {
            for j in 0..out.ncols() {
                let mut dot = 0.0;
                for i in 0..self.rows {
                    dot += v[i] * out[(i, j)];
                }
                let f = beta * dot;
                for i in 0..self.rows {
                    out[(i, j)] -= f * v[i];
                }
            }
        }
        out
    }

    /// Rows `rank..m` of `Q^T x`, i.e. `N^T x` for the left-null-space basis `N`.
    pub fn project(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let qtx = self.q_transpose_times(x);
        qtx.rows(self.rank, self.rows - self.rank).into_owned()
    }

    /// Materializes the orthonormal basis `N` (m x (m - rank)); test support.
    pub fn basis(&self) -> DMatrix<f64> {
        let m = self.rows;
        let k = self.null_dim();
        let mut n = DMatrix::zeros(m, k);
        for j in 0..k {
            let mut e = DVector::zeros(m);
            e[self.rank + j] = 1.0;
            // N column = Q e = H_1 H_2 ... H_r e (apply reflectors in reverse).
            for (v, beta) in self.reflectors.iter().rev() {
                let f = beta * v.dot(&e);
                e -= f * v;
            }
            n.set_column(j, &e);
        }
        n
    }
}
