//! Small dense complex helpers shared by the kernel, loading and solver code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// `x^H M x`.
pub fn quad_form(x: &CVector, m: &CMatrix) -> C64 {
    x.dotc(&(m * x))
}

pub fn frobenius_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entry-wise distance between `m` and `m^H`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigendecomposition of a Hermitian matrix. Only the lower triangle is read.
pub fn hermitian_eigen(m: &CMatrix) -> SymmetricEigen<C64, nalgebra::Dyn> {
    SymmetricEigen::new(m.clone())
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigen(m)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigen(m)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Hermitian square root `V diag(sqrt(l)) V^H` together with the smallest eigenvalue of `m`.
///
/// Negative eigenvalues are clamped to zero in the root; callers that need a
/// definiteness certificate inspect the returned eigenvalue.
pub fn hermitian_sqrt(m: &CMatrix) -> (CMatrix, f64) {
    let eig = hermitian_eigen(m);
    let min = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let mut scaled = eig.eigenvectors.clone();
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        scaled.column_mut(j).scale_mut(s);
    }
    let mut root = &scaled * eig.eigenvectors.adjoint();
    symmetrize(&mut root);
    (root, min)
}

/// Replace `m` by `(m + m^H) / 2` in place.
pub fn symmetrize(m: &mut CMatrix) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)].im = 0.0;
        for j in (i + 1)..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}
