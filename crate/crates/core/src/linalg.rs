//! Dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn adjoint(m: &CMat) -> CMat {
    m.adjoint()
}

pub fn conj(m: &CMat) -> CMat {
    m.map(|z| z.conj())
}

/// Largest singular value.
pub fn opnorm(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0_f64, |a, &b| a.max(b))
}

pub fn vec_norm(v: &CVec) -> f64 {
    v.norm()
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn diag_real(d: &[f64]) -> CMat {
    CMat::from_diagonal(&CVec::from_iterator(d.len(), d.iter().map(|&x| c64(x, 0.0))))
}

/// Inverse via LU, `None` if singular.
pub fn inverse(m: &CMat) -> Option<CMat> {
    if m.nrows() == 0 {
        return Some(CMat::zeros(0, 0));
    }
    m.clone().lu().try_inverse()
}

/// Singular values in descending order together with the right singular vectors (as columns).
pub fn svd_right(m: &CMat) -> (Vec<f64>, CMat) {
    let svd = nalgebra::SVD::new(m.clone(), false, true);
    let v = svd.v_t.expect("v_t requested").adjoint();
    let s: Vec<f64> = svd.singular_values.iter().copied().collect();
    (s, v)
}

/// Orthonormal basis of the null space, with a relative threshold on singular values.
pub fn nullspace(m: &CMat, rel_tol: f64) -> CMat {
    let n = m.ncols();
    if n == 0 {
        return CMat::zeros(0, 0);
    }
    let mut padded = m.clone();
    if m.nrows() < n {
        padded = padded.resize_vertically(n, ZERO);
    }
    let (s, v) = svd_right(&padded);
    let scale = s.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    let cols: Vec<usize> = (0..n).filter(|&k| s[k] <= rel_tol * scale).collect();
    let mut out = CMat::zeros(n, cols.len());
    for (c, &k) in cols.iter().enumerate() {
        out.set_column(c, &v.column(k));
    }
    out
}

/// Numerical rank with absolute threshold `tol`.
pub fn rank(m: &CMat, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    m.clone().singular_values().iter().filter(|&&s| s > tol).count()
}

/// Orthonormal basis for the column space, threshold relative to the largest singular value.
pub fn range_basis(m: &CMat, rel_tol: f64) -> CMat {
    let svd = nalgebra::SVD::new(m.clone(), true, false);
    let u = svd.u.expect("u requested");
    let s = &svd.singular_values;
    let scale = s.iter().fold(0.0_f64, |a, &b| a.max(b));
    let cols: Vec<usize> = (0..s.len()).filter(|&k| scale > 0.0 && s[k] > rel_tol * scale).collect();
    let mut out = CMat::zeros(m.nrows(), cols.len());
    for (c, &k) in cols.iter().enumerate() {
        out.set_column(c, &u.column(k));
    }
    out
}

/// Orthonormalize the columns of `m` (thin basis of its span).
pub fn orthonormalize(m: &CMat) -> CMat {
    range_basis(m, 1e-12)
}

/// Eigenvalues of a general complex matrix via the Schur form.
pub fn eigenvalues(m: &CMat) -> Vec<Complex64> {
    let n = m.nrows();
    if n == 0 {
        return vec![];
    }
    let (_, t) = nalgebra::Schur::new(m.clone()).unpack();
    let mut out = Vec::with_capacity(n);
    let scale = t.norm().max(1.0);
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)].norm() > 1e-14 * scale {
            let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let tr = a + d;
            let det = a * d - b * c;
            let disc = (tr * tr - 4.0 * det).sqrt();
            out.push((tr + disc) / 2.0);
            out.push((tr - disc) / 2.0);
            i += 2;
        } else {
            out.push(t[(i, i)]);
            i += 1;
        }
    }
    out
}

/// Hermitian eigen-decomposition: ascending eigenvalues and orthonormal eigenvectors.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let h = (m + m.adjoint()).scale(0.5);
    let eig = nalgebra::SymmetricEigen::new(h);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vecs = CMat::zeros(m.nrows(), idx.len());
    for (c, &k) in idx.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(k));
    }
    (vals, vecs)
}

/// Sine of the largest principal angle between the column spans of `a` and `b`.
pub fn subspace_distance(a: &CMat, b: &CMat) -> f64 {
    let qa = orthonormalize(a);
    let qb = orthonormalize(b);
    if qa.ncols() != qb.ncols() {
        return 1.0;
    }
    let resid = &qa - &qb * (qb.adjoint() * &qa);
    opnorm(&resid).min(1.0)
}

/// Hermitian part residual `‖M − M*‖`.
pub fn hermiticity_residual(m: &CMat) -> f64 {
    opnorm(&(m - m.adjoint()))
}

/// Entrywise relative-or-absolute comparison scale.
pub fn rel_scale(m: &CMat) -> f64 {
    opnorm(m).max(1.0)
}

/// Extract a principal submatrix.
pub fn submatrix(m: &CMat, rows: &[usize], cols: &[usize]) -> CMat {
    CMat::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Column matrix built from a list of vectors.
pub fn columns(vs: &[CVec], nrows: usize) -> CMat {
    let mut out = CMat::zeros(nrows, vs.len());
    for (c, v) in vs.iter().enumerate() {
        out.set_column(c, v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_rotation_generator() {
        let m = CMat::from_row_slice(2, 2, &[ZERO, -ONE, ONE, ZERO]);
        let mut ev = eigenvalues(&m);
        ev.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((ev[0] - c64(0.0, -1.0)).norm() < 1e-12);
        assert!((ev[1] - c64(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn nullspace_of_rank_one() {
        let m = CMat::from_row_slice(2, 2, &[ONE, ONE, ONE, ONE]);
        let n = nullspace(&m, 1e-10);
        assert_eq!(n.ncols(), 1);
        assert!((&m * &n).norm() < 1e-12);
    }

    #[test]
    fn subspace_distance_is_basis_independent() {
        let a = CMat::from_row_slice(3, 2, &[ONE, ZERO, ZERO, ONE, ZERO, ZERO]);
        let b = CMat::from_row_slice(3, 2, &[ONE, ONE, ONE, -ONE, ZERO, ZERO]);
        assert!(subspace_distance(&a, &b) < 1e-12);
    }
}
