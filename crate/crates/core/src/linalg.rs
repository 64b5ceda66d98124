//! Dense complex matrix helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

pub fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(n: usize) -> CMat {
    CMat::zeros(n, n)
}

/// Square real matrix from row-major values.
pub fn real(n: usize, rows: &[f64]) -> CMat {
    assert_eq!(rows.len(), n * n, "expected {} entries", n * n);
    CMat::from_row_iterator(n, n, rows.iter().map(|&x| re(x)))
}

pub fn real_diag(values: &[f64]) -> CMat {
    let n = values.len();
    let mut m = zeros(n);
    for (i, &v) in values.iter().enumerate() {
        m[(i, i)] = re(v);
    }
    m
}

pub fn frob(m: &CMat) -> f64 {
    m.norm()
}

pub fn hermitian_defect(m: &CMat) -> f64 {
    (m - m.adjoint()).norm()
}

/// `(M + M*) / 2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

pub fn is_hermitian(m: &CMat, rel_tol: f64) -> bool {
    hermitian_defect(m) <= rel_tol * frob(m).max(1.0)
}

/// Largest off-diagonal modulus.
pub fn off_diagonal_norm(m: &CMat) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                worst = worst.max(m[(i, j)].norm());
            }
        }
    }
    worst
}

/// Eigen-decomposition of the Hermitian part of `m`: eigenvalues and the
/// matrix whose columns are the corresponding orthonormal eigenvectors.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = hermitian_part(m).symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Smallest singular value; vanishes exactly where the matrix is singular.
pub fn sigma_min(m: &CMat) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].norm();
    }
    singular_values(m).into_iter().fold(f64::INFINITY, f64::min)
}

pub fn inverse(m: &CMat) -> Option<CMat> {
    m.clone().try_inverse()
}

/// `‖Φ*Ψ − Ψ*Φ‖_F`, zero for conjoined pairs.
pub fn conjoined_defect(phi: &CMat, psi: &CMat) -> f64 {
    let w = phi.adjoint() * psi;
    (&w - w.adjoint()).norm()
}

pub fn all_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Appends the real and imaginary parts of `m` (column-major) to `out`.
pub fn push_flat(m: &CMat, out: &mut Vec<f64>) {
    for z in m.iter() {
        out.push(z.re);
        out.push(z.im);
    }
}

/// Inverse of [`push_flat`]: reads an `n × n` matrix from `data`.
pub fn from_flat(n: usize, data: &[f64]) -> CMat {
    debug_assert_eq!(data.len(), 2 * n * n);
    CMat::from_iterator(
        n,
        n,
        data.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])),
    )
}

pub fn write_flat(m: &CMat, out: &mut [f64]) {
    for (z, slot) in m.iter().zip(out.chunks_exact_mut(2)) {
        slot[0] = z.re;
        slot[1] = z.im;
    }
}
