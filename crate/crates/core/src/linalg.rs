//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::DMatrix;

/// Symmetric part `(m + mᵀ)/2`.
pub fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn sym_min_eig(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    sym(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Largest eigenvalue of the symmetric part of `m`.
pub fn sym_max_eig(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    sym(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Spectral norm (largest singular value).
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.singular_values()
        .iter()
        .copied()
        .fold(0.0_f64, f64::max)
}

/// Row-major flattening.
pub fn to_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn from_row_major(n: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, data)
}
