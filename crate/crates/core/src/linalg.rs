//! Small dense complex linear algebra used across the crate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Kronecker product `a (x) b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn kron_vec(a: &CVec, b: &CVec) -> CVec {
    CVec::from_fn(a.len() * b.len(), |i, _| a[i / b.len()] * b[i % b.len()])
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// Largest entry modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    m.is_square() && max_abs(&(m - m.adjoint())) <= tol
}

/// `|| U^dagger U - I ||_F`.
pub fn unitarity_defect(u: &CMat) -> f64 {
    frobenius(&(u.adjoint() * u - identity(u.ncols())))
}

/// Eigenvalues (ascending) of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &CMat) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::Eigensolver("matrix is not square".into()));
    }
    let eig = m.clone().symmetric_eigen();
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigensolver("non-finite eigenvalue".into()));
    }
    vals.sort_by(|a, b| a.total_cmp(b));
    Ok(vals)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending with
/// eigenvectors as the matching columns.
pub fn hermitian_eigen(m: &CMat) -> Result<(Vec<f64>, CMat)> {
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigensolver("non-finite eigenvalue".into()));
    }
    let vecs = CMat::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((vals, vecs))
}

/// `exp(-i H dt)` for Hermitian `H`.
pub fn expm_hermitian(h: &CMat, dt: f64) -> Result<CMat> {
    let (vals, vecs) = hermitian_eigen(h)?;
    let phases = CVec::from_iterator(vals.len(), vals.iter().map(|&e| (-I * e * dt).exp()));
    Ok(&vecs * CMat::from_diagonal(&phases) * vecs.adjoint())
}

/// Unitary factor of the polar decomposition `m = U P`.
pub fn polar_unitary(m: &CMat) -> CMat {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    u * v_t
}

pub fn basis_vector(n: usize, k: usize) -> CVec {
    let mut v = CVec::zeros(n);
    v[k] = ONE;
    v
}

pub fn norm_sqr(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub fn outer(v: &CVec) -> CMat {
    v * v.adjoint()
}
