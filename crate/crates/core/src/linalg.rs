//! Dense complex linear algebra helpers shared by every module.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Real diagonal matrix.
pub fn diag(values: &[f64]) -> CMat {
    let n = values.len();
    CMat::from_fn(n, n, |i, j| if i == j { c64(values[i], 0.0) } else { c64(0.0, 0.0) })
}

/// `|a⟩⟨b|`, i.e. `a b*`.
pub fn outer(a: &CVec, b: &CVec) -> CMat {
    a * b.adjoint()
}

/// `⟨a, b⟩`, conjugate-linear in the first slot.
pub fn inner(a: &CVec, b: &CVec) -> Complex64 {
    a.dotc(b)
}

/// `⟨u, m v⟩`.
pub fn form(m: &CMat, u: &CVec, v: &CVec) -> Complex64 {
    u.dotc(&(m * v))
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * c64(0.5, 0.0)
}

/// Frobenius norm of `m - m*`.
pub fn hermitian_defect(m: &CMat) -> f64 {
    (m - m.adjoint()).norm()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

// nalgebra's implicit QR can hit 0/0 on matrices with exactly zero blocks;
// a diagonal shift moves it off that path without changing eigenvectors.
fn hermitian_eigen(h: CMat) -> nalgebra::SymmetricEigen<Complex64, nalgebra::Dyn> {
    let n = h.nrows();
    let eig = h.clone().symmetric_eigen();
    if eig.eigenvalues.iter().all(|e| e.is_finite()) {
        return eig;
    }
    let base = h.norm().max(1.0);
    for k in 1..=4 {
        let shift = base * k as f64 * 0.618;
        let mut eig = (&h + CMat::identity(n, n) * c64(shift, 0.0)).symmetric_eigen();
        if eig.eigenvalues.iter().all(|e| e.is_finite()) {
            eig.eigenvalues.apply(|e| *e -= shift);
            return eig;
        }
    }
    eig
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn eigvalsh(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = hermitian_eigen(hermitian_part(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn min_eig(m: &CMat) -> f64 {
    eigvalsh(m).first().copied().unwrap_or(0.0)
}

pub fn max_eig(m: &CMat) -> f64 {
    eigvalsh(m).last().copied().unwrap_or(0.0)
}

/// Spectral norm of the Hermitian part (largest |eigenvalue|).
pub fn herm_norm(m: &CMat) -> f64 {
    eigvalsh(m).iter().fold(0.0, |acc, e| acc.max(e.abs()))
}

/// Largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().fold(0.0, |acc, s| acc.max(*s))
}

/// Clip the negative spectrum of the Hermitian part of `m`.
pub fn psd_projection(m: &CMat) -> CMat {
    let eig = hermitian_eigen(hermitian_part(m));
    let clipped = eig.eigenvalues.map(|e| c64(e.max(0.0), 0.0));
    let v = &eig.eigenvectors;
    v * CMat::from_diagonal(&clipped) * v.adjoint()
}

/// Orthonormal basis (as columns) of the null space of `a`, using a relative
/// singular-value threshold. Also returns the singular values for callers that
/// want to inspect the gap.
pub fn null_space(a: &CMat, rel_tol: f64) -> (CMat, Vec<f64>) {
    let (r, n) = a.shape();
    if n == 0 {
        return (CMat::zeros(0, 0), Vec::new());
    }
    let square = if r < n {
        let mut p = CMat::zeros(n, n);
        p.view_mut((0, 0), (r, n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = square.svd(false, true);
    let v_t = svd.v_t.expect("requested v_t");
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let smax = sv.iter().fold(0.0f64, |acc, s| acc.max(*s));
    let cutoff = rel_tol * smax.max(f64::MIN_POSITIVE);
    let cols: Vec<CVec> = sv
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= cutoff)
        .map(|(i, _)| v_t.row(i).adjoint())
        .collect();
    let basis = if cols.is_empty() { CMat::zeros(n, 0) } else { CMat::from_columns(&cols) };
    (basis, sv)
}

/// Orthonormal basis of the column span of `a`.
pub fn column_basis(a: &CMat, rel_tol: f64) -> CMat {
    let (n, k) = a.shape();
    if k == 0 || n == 0 {
        return CMat::zeros(n, 0);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("requested u");
    let smax = svd.singular_values.iter().fold(0.0f64, |acc, s| acc.max(*s));
    let cols: Vec<CVec> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > rel_tol * smax && smax > 0.0)
        .map(|(i, _)| u.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        CMat::zeros(n, 0)
    } else {
        CMat::from_columns(&cols)
    }
}

/// Orthonormal basis of the orthogonal complement of span(q).
pub fn orthogonal_complement(q: &CMat, rel_tol: f64) -> CMat {
    let n = q.nrows();
    if q.ncols() == 0 {
        return identity(n);
    }
    null_space(&q.adjoint(), rel_tol).0
}

/// `‖Q*Q - I‖_F` for a matrix whose columns should be orthonormal.
pub fn orthonormality_defect(q: &CMat) -> f64 {
    (q.adjoint() * q - identity(q.ncols())).norm()
}

/// Matrix exponential of `m`.
pub fn expm(m: &CMat) -> CMat {
    if m.nrows() == 0 {
        return m.clone();
    }
    m.clone().exp()
}

/// `v* x v` for a matrix of columns `v`.
pub fn congruence(x: &CMat, v: &CMat) -> CMat {
    v.adjoint() * x * v
}

pub fn trace(m: &CMat) -> Complex64 {
    m.trace()
}

pub fn symmetrize_in_place(m: &mut CMat) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = c64(m[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

/// Symmetrize `out` when the reference operand `c` is Hermitian.
pub fn symmetrize_in_place_if_hermitian(out: &mut CMat, c: &CMat) {
    if hermitian_defect(c) <= 1e-12 * c.norm().max(1.0) {
        symmetrize_in_place(out);
    }
}

pub fn basis_vector(n: usize, k: usize) -> CVec {
    let mut v = CVec::zeros(n);
    v[k] = c64(1.0, 0.0);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigvalsh_sorted_and_real() {
        let m = diag(&[3.0, -1.0, 2.0]);
        assert_eq!(eigvalsh(&m), vec![-1.0, 2.0, 3.0]);
        assert_eq!(min_eig(&m), -1.0);
        assert_eq!(herm_norm(&m), 3.0);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        // one constraint in C^3: x0 + x1 = 0
        let a = CMat::from_row_slice(1, 3, &[c64(1.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0)]);
        let (ns, _) = null_space(&a, 1e-12);
        assert_eq!(ns.ncols(), 2);
        assert!((&a * &ns).norm() < 1e-12);
        assert!(orthonormality_defect(&ns) < 1e-12);
    }

    #[test]
    fn complement_of_axis_subspace() {
        let q = CMat::from_columns(&[basis_vector(4, 0), basis_vector(4, 2)]);
        let c = orthogonal_complement(&q, 1e-12);
        assert_eq!(c.ncols(), 2);
        assert!((q.adjoint() * &c).norm() < 1e-12);
    }

    #[test]
    fn psd_projection_clips() {
        let p = psd_projection(&diag(&[-2.0, 1.0]));
        assert!((p - diag(&[0.0, 1.0])).norm() < 1e-12);
    }

    #[test]
    fn expm_diagonal() {
        let e = expm(&diag(&[-1.0, -2.0]));
        assert!((e[(0, 0)].re - (-1.0f64).exp()).abs() < 1e-15);
        assert!((e[(1, 1)].re - (-2.0f64).exp()).abs() < 1e-15);
    }
}
