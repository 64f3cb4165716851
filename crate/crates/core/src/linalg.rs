use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

/// Solves `A x = rhs` for symmetric positive definite `A`.
pub(crate) fn solve_spd(a: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let chol = Cholesky::new(a.clone())?;
    let x = chol.solve(rhs);
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Inverse of a symmetric positive definite matrix.
pub(crate) fn inverse_spd(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let inv = Cholesky::new(a.clone())?.inverse();
    inv.iter().all(|v| v.is_finite()).then_some(inv)
}

/// Moore–Penrose inverse of a symmetric matrix; eigenvalues below
/// `rel_tol · max|λ|` are treated as zero. Also returns the number dropped.
pub(crate) fn pinv_sym(a: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, usize) {
    let eig = SymmetricEigen::new(a.clone());
    let scale = eig.eigenvalues.amax();
    let mut dropped = 0;
    let inv_vals = eig.eigenvalues.map(|v| {
        if v.abs() > rel_tol * scale {
            1.0 / v
        } else {
            dropped += 1;
            0.0
        }
    });
    let q = &eig.eigenvectors;
    (q * DMatrix::from_diagonal(&inv_vals) * q.transpose(), dropped)
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub(crate) fn eig_extremes(a: &DMatrix<f64>) -> (f64, f64) {
    let vals = SymmetricEigen::new(a.clone()).eigenvalues;
    (vals.min(), vals.max())
}

pub(crate) fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
}
