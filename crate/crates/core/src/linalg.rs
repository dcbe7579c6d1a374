//! Dense real matrix kernel.
//!
//! Everything here operates on [`nalgebra::DMatrix<f64>`]. Tolerances are
//! relative to the Frobenius norm of the operand.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Largest entry count a composed matrix may have.
pub const MAX_ENTRIES: usize = 1 << 24;

const SYMMETRY_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;

/// Symmetric eigendecomposition with eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub eigenvalues: Vec<f64>,
    /// Column `k` is paired with `eigenvalues[k]`.
    pub eigenvectors: Matrix,
}

impl SymEigen {
    pub fn reconstruct(&self) -> Matrix {
        let n = self.eigenvalues.len();
        let mut scaled = self.eigenvectors.clone();
        for k in 0..n {
            scaled.column_mut(k).scale_mut(self.eigenvalues[k]);
        }
        scaled * self.eigenvectors.transpose()
    }
}

/// `P_a = I_a - J_a / a`.
pub fn centering(a: usize) -> Result<Matrix> {
    if a == 0 {
        return Err(Error::InvalidDimension(
            "centering matrix needs a >= 1".into(),
        ));
    }
    let off = -1.0 / a as f64;
    Ok(Matrix::from_fn(
        a,
        a,
        |i, j| if i == j { 1.0 + off } else { off },
    ))
}

/// `J_a / a`, the averaging matrix.
pub fn averaging(a: usize) -> Result<Matrix> {
    if a == 0 {
        return Err(Error::InvalidDimension(
            "averaging matrix needs a >= 1".into(),
        ));
    }
    Ok(Matrix::from_element(a, a, 1.0 / a as f64))
}

pub fn kron(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let rows = a.nrows().checked_mul(b.nrows());
    let cols = a.ncols().checked_mul(b.ncols());
    match (rows, cols) {
        (Some(r), Some(c)) if r.checked_mul(c).is_some_and(|n| n <= MAX_ENTRIES) => {
            Ok(a.kronecker(b))
        }
        _ => Err(Error::SizeLimit(format!(
            "kronecker product of {}x{} and {}x{} exceeds {} entries",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            MAX_ENTRIES
        ))),
    }
}

/// Kronecker product of a sequence, left to right.
pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a Matrix>) -> Result<Matrix> {
    let mut acc = Matrix::from_element(1, 1, 1.0);
    for f in factors {
        acc = kron(&acc, f)?;
    }
    Ok(acc)
}

/// Block-diagonal matrix with the given blocks.
pub fn direct_sum(blocks: &[Matrix]) -> Result<Matrix> {
    if blocks.is_empty() {
        return Err(Error::InvalidArgument("direct sum of an empty list".into()));
    }
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    if rows.saturating_mul(cols) > MAX_ENTRIES {
        return Err(Error::SizeLimit(format!(
            "direct sum of size {rows}x{cols} exceeds {MAX_ENTRIES} entries"
        )));
    }
    let mut out = Matrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    Ok(out)
}

pub fn frobenius(a: &Matrix) -> f64 {
    a.norm()
}

pub fn is_symmetric(a: &Matrix, rel_tol: f64) -> bool {
    if !a.is_square() {
        return false;
    }
    let scale = frobenius(a);
    let asym = (a - a.transpose()).norm();
    asym <= rel_tol * scale
}

fn symmetrized(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

pub fn sym_eigen(a: &Matrix) -> Result<SymEigen> {
    if !is_symmetric(a, SYMMETRY_TOL) {
        return Err(Error::Shape(format!(
            "symmetric eigendecomposition requires a symmetric matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(SymEigen {
            eigenvalues: Vec::new(),
            eigenvectors: Matrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::new(symmetrized(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = Matrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(SymEigen {
        eigenvalues,
        eigenvectors,
    })
}

/// Moore-Penrose pseudoinverse.
///
/// Symmetric inputs go through the symmetric eigendecomposition, everything
/// else through the SVD. Singular values below
/// `max(rows, cols) * eps * sigma_max` are treated as zero.
pub fn moore_penrose(a: &Matrix) -> Matrix {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Matrix::zeros(n, m);
    }
    let cutoff_factor = m.max(n) as f64 * f64::EPSILON;

    if is_symmetric(a, SYMMETRY_TOL) {
        if let Ok(eig) = sym_eigen(a) {
            let max_abs = eig
                .eigenvalues
                .iter()
                .fold(0.0_f64, |acc, v| acc.max(v.abs()));
            let cutoff = cutoff_factor * max_abs;
            let mut scaled = eig.eigenvectors.clone();
            for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
                let inv = if lambda.abs() > cutoff {
                    1.0 / lambda
                } else {
                    0.0
                };
                scaled.column_mut(k).scale_mut(inv);
            }
            return symmetrized(&(scaled * eig.eigenvectors.transpose()));
        }
    }

    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sigma_max = svd
        .singular_values
        .iter()
        .fold(0.0_f64, |acc, &s| acc.max(s));
    let cutoff = cutoff_factor * sigma_max;
    let mut v_scaled = v_t.transpose();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        let inv = if s > cutoff { 1.0 / s } else { 0.0 };
        v_scaled.column_mut(k).scale_mut(inv);
    }
    v_scaled * u.transpose()
}

/// Symmetric square root `L` of a PSD matrix, with `L * L^T = A`.
///
/// Eigenvalues in `[-1e-10 * ||A||_F, 0)` are clamped to zero; anything more
/// negative is rejected.
pub fn psd_sqrt(a: &Matrix) -> Result<Matrix> {
    let eig = sym_eigen(a)?;
    let floor = -PSD_TOL * frobenius(a);
    if let Some(&min) = eig.eigenvalues.last() {
        if min < floor {
            return Err(Error::NotPsd {
                min_eigenvalue: min,
            });
        }
    }
    let mut scaled = eig.eigenvectors.clone();
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        scaled.column_mut(k).scale_mut(lambda.max(0.0).sqrt());
    }
    Ok(scaled * eig.eigenvectors.transpose())
}

/// Orthonormal basis of the range of an orthogonal projection, one basis
/// vector per row.
pub fn projection_basis(t: &Matrix) -> Result<Matrix> {
    let eig = sym_eigen(t)?;
    let rank = eig.eigenvalues.iter().filter(|&&l| l > 0.5).count();
    Ok(eig.eigenvectors.columns(0, rank).transpose())
}
