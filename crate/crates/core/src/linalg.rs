//! Small complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CVec = DVector<Complex64>;
pub type CMat = DMatrix<Complex64>;

pub const J: Complex64 = Complex64::new(0.0, 1.0);

/// `(H + H^H) / 2`.
pub fn hermitian_part(h: &CMat) -> CMat {
    (h + h.adjoint()) * Complex64::from(0.5)
}

/// Largest entry of `H - H^H` relative to the largest entry of `H`.
pub fn asymmetry(h: &CMat) -> f64 {
    let scale = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let diff = h - h.adjoint();
    diff.iter().map(|z| z.norm()).fold(0.0, f64::max) / scale
}

pub fn trace_re(h: &CMat) -> f64 {
    h.diagonal().iter().map(|z| z.re).sum()
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(h: &CMat) -> (Vec<f64>, CMat) {
    let eig = hermitian_part(h).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(h.nrows(), h.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Rebuilds `V diag(values) V^H`.
pub fn from_eigen(values: &[f64], vectors: &CMat) -> CMat {
    let n = vectors.nrows();
    let mut out = CMat::zeros(n, n);
    for (k, &lam) in values.iter().enumerate() {
        if lam == 0.0 {
            continue;
        }
        let v = vectors.column(k);
        out += (&v * v.adjoint()) * Complex64::from(lam);
    }
    out
}

/// Whether a Hermitian matrix is positive semidefinite up to a relative tolerance.
pub fn is_psd(h: &CMat, rel_tol: f64) -> bool {
    if h.nrows() == 0 {
        return true;
    }
    let (values, _) = hermitian_eigen(h);
    let scale = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    values[0] >= -rel_tol * scale.max(f64::MIN_POSITIVE)
}

/// Principal square root of a PSD matrix (negative eigenvalues clamped).
pub fn psd_sqrt(h: &CMat) -> CMat {
    let (values, vectors) = hermitian_eigen(h);
    let roots: Vec<f64> = values.iter().map(|v| v.max(0.0).sqrt()).collect();
    from_eigen(&roots, &vectors)
}

/// Block-diagonal `[[a, 0], [0, I_k]]`.
pub fn extend_with_identity(a: &CMat, k: usize) -> CMat {
    let n = a.nrows();
    let mut out = CMat::zeros(n + k, n + k);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    for i in 0..k {
        out[(n + i, n + i)] = Complex64::from(1.0);
    }
    out
}
