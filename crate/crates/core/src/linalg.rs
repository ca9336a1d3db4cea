//! Small complex linear-algebra helpers shared by every module.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;

pub type C64 = Complex<f64>;
pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;

/// Relative gap under which two eigenvalues count as tied.
const EIGEN_TIE_RTOL: f64 = 1e-12;

/// `v v^H`.
pub fn outer(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

/// `Re tr(A B)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let x = a[(i, j)] * b[(j, i)];
            acc += x.re;
        }
    }
    acc
}

/// Real part of the trace.
pub fn trace_re(a: &CMatrix) -> f64 {
    a.diagonal().iter().map(|z| z.re).sum()
}

/// `h^H A h` (real for Hermitian `A`).
pub fn quad_form(a: &CMatrix, h: &CVector) -> f64 {
    (h.adjoint() * a * h)[(0, 0)].re
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Eigen-decomposition of a Hermitian matrix.
///
/// Eigenvalues come back in ascending order with the eigenvectors reordered to
/// match; ties keep the solver's original relative order, so the smallest
/// original index wins wherever a caller picks "the first" of a tied group.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(hermitian_part(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Largest eigenvalue and a unit eigenvector for it.
///
/// Among eigenvalues tied with the maximum, the one the eigensolver reports
/// at the smallest index is used; the vector is then phase-normalised with
/// [`normalize_phase`].
pub fn top_eigenpair(a: &CMatrix) -> (f64, CVector) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(hermitian_part(a));
    let max = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let scale = eig.eigenvalues.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let tol = EIGEN_TIE_RTOL * scale.max(f64::MIN_POSITIVE);
    let idx = (0..n)
        .find(|&i| eig.eigenvalues[i] >= max - tol)
        .unwrap_or(0);
    let mut v: CVector = eig.eigenvectors.column(idx).into_owned();
    let norm = v.norm();
    if norm > 0.0 {
        v.unscale_mut(norm);
    }
    normalize_phase(&mut v);
    (max, v)
}

/// Rotates `v` so that its largest-magnitude entry is real and nonnegative.
/// Magnitude ties resolve to the smallest index.
pub fn normalize_phase(v: &mut CVector) {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, z) in v.iter().enumerate() {
        let m = z.norm();
        if m > best_mag * (1.0 + EIGEN_TIE_RTOL) {
            best = i;
            best_mag = m;
        }
    }
    if best_mag > 0.0 {
        let rot = v[best].conj() / best_mag;
        for z in v.iter_mut() {
            *z *= rot;
        }
        v[best] = C64::new(v[best].re, 0.0);
    }
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(a: &CMatrix) -> f64 {
    let eig = SymmetricEigen::new(hermitian_part(a));
    eig.eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// `tr(W) - λ_max(W)`: zero exactly when a PSD `W` has rank at most one.
pub fn rank_one_residual(w: &CMatrix) -> f64 {
    if w.nrows() == 0 {
        return 0.0;
    }
    trace_re(w) - top_eigenpair(w).0
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Real matrix with the entries of a complex one's real part, for tests.
pub fn real_part(a: &CMatrix) -> DMatrix<f64> {
    a.map(|z| z.re)
}
