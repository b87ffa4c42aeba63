//! Small dense least-squares helpers shared by the estimators.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance below which a column counts as linearly dependent on
/// the columns before it.
pub const COLLINEAR_TOL: f64 = 1e-9;

/// Indices of a maximal set of linearly independent columns, scanning left
/// to right with modified Gram-Schmidt.
pub fn independent_columns(x: &DMatrix<f64>, tol: f64) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut keep = Vec::new();
    for j in 0..x.ncols() {
        let col = x.column(j).into_owned();
        let norm0 = col.norm();
        if norm0 == 0.0 {
            continue;
        }
        let mut v = col;
        for q in &basis {
            let proj = q.dot(&v);
            v.axpy(-proj, q, 1.0);
        }
        let norm = v.norm();
        if norm > tol * norm0 {
            basis.push(v / norm);
            keep.push(j);
        }
    }
    keep
}

pub fn select_columns(x: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), cols.len(), |i, j| x[(i, cols[j])])
}

/// Least squares on a full-column-rank design via Householder QR.
pub fn lstsq(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let (n, k) = x.shape();
    if k == 0 {
        return Ok(DVector::zeros(0));
    }
    if n < k {
        return Err(Error::RankDeficient(format!("{n} observations for {k} parameters")));
    }
    let qr = x.clone().qr();
    let qty = qr.q().transpose() * y;
    qr.r()
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Singular("triangular factor of the design".into()))
}

/// Residual sum of squares of `y` on `x` after dropping dependent columns.
pub fn ols_ssr(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
    let cols = independent_columns(x, COLLINEAR_TOL);
    let xs = select_columns(x, &cols);
    let b = lstsq(&xs, y)?;
    Ok((y - xs * b).norm_squared())
}

/// Moore-Penrose pseudo-inverse of a symmetric positive semi-definite matrix.
pub fn pinv_sym(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = a.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = max * a.nrows() as f64 * f64::EPSILON;
    let inv = eig.eigenvalues.map(|v| if v.abs() > cut { 1.0 / v } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

/// Inverse of a symmetric positive definite matrix.
pub fn inv_spd(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    a.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Singular(what.to_string()))
}
