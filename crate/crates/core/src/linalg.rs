//! Small dense linear-algebra helpers on top of `nalgebra`.
//!
//! Inverses and square roots of symmetric matrices go through a symmetric
//! eigendecomposition so the results stay exactly symmetric.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue floor applied before inverting Jacobian estimates.
pub const EIGEN_FLOOR: f64 = 1e-10;

/// Symmetrize in place: `a <- (a + a') / 2`, leaving the diagonal untouched.
pub(crate) fn symmetrize(a: &mut DMatrix<f64>) {
    let m = a.nrows();
    for i in 0..m {
        for j in (i + 1)..m {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

fn rebuild(eig: &SymmetricEigen<f64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let m = eig.eigenvalues.len();
    let q = &eig.eigenvectors;
    let mut out = DMatrix::zeros(m, m);
    for k in 0..m {
        let lam = f(eig.eigenvalues[k]);
        for i in 0..m {
            let qi = q[(i, k)] * lam;
            for j in 0..m {
                out[(i, j)] += qi * q[(j, k)];
            }
        }
    }
    symmetrize(&mut out);
    out
}

/// Inverse of a symmetric matrix whose eigenvalues are first floored at
/// `rel_floor * trace / m` (and at a tiny absolute value).
pub fn floored_inverse(a: &DMatrix<f64>, rel_floor: f64) -> DMatrix<f64> {
    let m = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let trace: f64 = (0..m).map(|i| a[(i, i)]).sum();
    let floor = (rel_floor * trace / m as f64).max(f64::MIN_POSITIVE);
    rebuild(&eig, |l| 1.0 / l.max(floor))
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Symmetric square root of a PSD matrix; negative eigenvalues from rounding are clamped to 0.
pub fn sym_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(a.clone());
    rebuild(&eig, |l| l.max(0.0).sqrt())
}

/// Inverse symmetric square root, with the same eigenvalue floor as [`floored_inverse`].
pub fn sym_inv_sqrt(a: &DMatrix<f64>, rel_floor: f64) -> DMatrix<f64> {
    let m = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let trace: f64 = (0..m).map(|i| a[(i, i)]).sum();
    let floor = (rel_floor * trace / m as f64).max(f64::MIN_POSITIVE);
    rebuild(&eig, |l| 1.0 / l.max(floor).sqrt())
}

/// Checks the columns of `z` for linear dependence with modified Gram-Schmidt.
///
/// Returns the first column that lies (numerically) in the span of the
/// preceding independent columns.
pub fn check_full_column_rank(z: &DMatrix<f64>) -> Result<()> {
    let (n, m) = z.shape();
    let mut basis: Vec<(usize, DVector<f64>)> = Vec::with_capacity(m);
    for j in 0..m {
        let col = z.column(j).into_owned();
        let norm0 = col.norm();
        let mut v = col;
        // two passes of MGS for stability
        for _ in 0..2 {
            for (_, q) in &basis {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let norm = v.norm();
        if norm0 == 0.0 || norm <= 1e-10 * norm0.max(1.0) || n == 0 {
            return Err(Error::RankDeficient {
                column: j,
                span: basis.iter().map(|(k, _)| *k).collect(),
            });
        }
        basis.push((j, v / norm));
    }
    Ok(())
}

/// Solves the square system `a x = b` by LU with partial pivoting.
/// Returns `None` when `a` is numerically singular.
pub fn solve_square(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let lu = a.clone().lu();
    let x = lu.solve(b)?;
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// `x' A y` for a square matrix.
pub fn quad_form(a: &DMatrix<f64>, x: &[f64], y: &[f64]) -> f64 {
    let m = a.nrows();
    let mut s = 0.0;
    for i in 0..m {
        let mut row = 0.0;
        for j in 0..m {
            row += a[(i, j)] * y[j];
        }
        s += x[i] * row;
    }
    s
}

/// `A x` as a plain vector.
pub fn mat_vec(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let (r, c) = a.shape();
    (0..r)
        .map(|i| (0..c).map(|j| a[(i, j)] * x[j]).sum())
        .collect()
}
