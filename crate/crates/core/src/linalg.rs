//! Small complex linear-algebra helpers on top of nalgebra.
//!
//! Everything that is nominally Hermitian is symmetrized after it is formed, and
//! inverses are always applied through Cholesky solves or spectral factors.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn real(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `(A + A^H) / 2`.
pub fn hermitize(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// `I + A`, symmetrized.
pub fn identity_plus(a: &CMat) -> CMat {
    hermitize(&(a + identity(a.nrows())))
}

pub fn trace(a: &CMat) -> C64 {
    a.diagonal().iter().sum()
}

pub fn frobenius_sq(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn frobenius(a: &CMat) -> f64 {
    frobenius_sq(a).sqrt()
}

/// Euclidean norm of row `i`.
pub fn row_norm(a: &CMat, i: usize) -> f64 {
    a.row(i).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Real sum of `tr(A^H B)` without forming the product.
pub fn inner_re(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

pub fn is_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn cholesky(a: &CMat, what: &str) -> Result<nalgebra::Cholesky<C64, nalgebra::Dyn>> {
    let fail = || Error::numerical(format!("{what} is not Hermitian positive definite"));
    let chol = hermitize(a).cholesky().ok_or_else(fail)?;
    // Complex square roots never fail, so a negative pivot shows up as an imaginary diagonal.
    let l = chol.l_dirty();
    for i in 0..l.nrows() {
        let z = l[(i, i)];
        if !(z.re > 0.0 && z.re.is_finite()) || z.im.abs() > 1e-12 * z.re {
            return Err(fail());
        }
    }
    Ok(chol)
}

/// `log det A` for Hermitian positive-definite `A`.
pub fn logdet_hpd(a: &CMat) -> Result<f64> {
    let chol = cholesky(a, "logdet argument")?;
    let l = chol.l_dirty();
    Ok(2.0 * (0..a.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>())
}

/// Solves `A X = B` for Hermitian positive-definite `A`.
pub fn solve_hpd(a: &CMat, b: &CMat) -> Result<CMat> {
    Ok(cholesky(a, "system matrix")?.solve(b))
}

/// Eigen-decomposition of a Hermitian matrix: real eigenvalues and unitary eigenvectors.
pub fn hermitian_eigen(a: &CMat) -> (DVector<f64>, CMat) {
    let eig = SymmetricEigen::new(hermitize(a));
    (eig.eigenvalues, eig.eigenvectors)
}

pub fn max_eigenvalue(a: &CMat) -> f64 {
    hermitian_eigen(a).0.max()
}

pub fn min_eigenvalue(a: &CMat) -> f64 {
    hermitian_eigen(a).0.min()
}

/// Largest singular value.
pub fn spectral_norm(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let gram = if a.nrows() <= a.ncols() {
        a * a.adjoint()
    } else {
        a.adjoint() * a
    };
    max_eigenvalue(&gram).max(0.0).sqrt()
}

/// Spectral norm of a Hermitian positive semi-definite matrix.
pub fn psd_norm(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    max_eigenvalue(a).max(0.0)
}

/// Stacks matrices with equal column counts vertically.
pub fn vstack(blocks: &[CMat]) -> CMat {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(b);
        r += b.nrows();
    }
    out
}

/// Largest element-wise modulus difference between two equally sized matrices.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// `‖A − B‖_F / max(‖B‖_F, tiny)`.
pub fn rel_frobenius_error(a: &CMat, b: &CMat) -> f64 {
    frobenius(&(a - b)) / frobenius(b).max(f64::MIN_POSITIVE)
}

/// Serializable form of a complex matrix: row-major real and imaginary parts.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MatrixRecord {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl From<&CMat> for MatrixRecord {
    fn from(a: &CMat) -> Self {
        let (rows, cols) = a.shape();
        let entries = (0..rows).flat_map(|r| (0..cols).map(move |c| (r, c)));
        Self {
            rows,
            cols,
            re: entries.clone().map(|(r, c)| a[(r, c)].re).collect(),
            im: entries.map(|(r, c)| a[(r, c)].im).collect(),
        }
    }
}

impl MatrixRecord {
    pub fn to_matrix(&self) -> Result<CMat> {
        let n = self.rows * self.cols;
        if self.re.len() != n || self.im.len() != n {
            return Err(Error::invalid(format!(
                "matrix record {}x{} has {} real and {} imaginary entries",
                self.rows,
                self.cols,
                self.re.len(),
                self.im.len()
            )));
        }
        Ok(CMat::from_fn(self.rows, self.cols, |r, c| {
            C64::new(self.re[r * self.cols + c], self.im[r * self.cols + c])
        }))
    }
}

/// `#[serde(with = ...)]` adapter for `Vec<CMat>`.
pub mod serde_cmats {
    use super::{CMat, MatrixRecord};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[CMat], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(MatrixRecord::from).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CMat>, D::Error> {
        Vec::<MatrixRecord>::deserialize(d)?
            .iter()
            .map(|r| r.to_matrix().map_err(serde::de::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logdet_matches_diagonal_product() {
        let a = CMat::from_diagonal(&DVector::from_vec(vec![real(2.0), real(3.0)]));
        assert!((logdet_hpd(&a).unwrap() - 6.0f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn logdet_rejects_indefinite() {
        let a = CMat::from_diagonal(&DVector::from_vec(vec![real(1.0), real(-1.0)]));
        assert!(matches!(logdet_hpd(&a), Err(Error::NumericalFailure(_))));
    }

    #[test]
    fn complex_hermitian_eigen_reconstructs() {
        let a = CMat::from_row_slice(2, 2, &[real(2.0), c(0.0, 1.0), c(0.0, -1.0), real(2.0)]);
        let (vals, vecs) = hermitian_eigen(&a);
        let rebuilt = &vecs * CMat::from_diagonal(&vals.map(real)) * vecs.adjoint();
        assert!(max_abs_diff(&rebuilt, &a) < 1e-12);
        assert!((vals.max() - 3.0).abs() < 1e-12 && (vals.min() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_of_rectangular() {
        let a = CMat::from_row_slice(1, 2, &[real(3.0), c(0.0, 4.0)]);
        assert!((spectral_norm(&a) - 5.0).abs() < 1e-12);
    }
}
