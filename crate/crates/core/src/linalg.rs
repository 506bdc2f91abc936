//! Small dense complex-matrix helpers shared by the solvers.
//!
//! Qubit basis convention: index 0 is the ground state |g> = |0>, index 1 the
//! excited state |e> = |1>. Two-qubit states are ordered |q1 q2> with index
//! `2*q1 + q2`, so `rho[(0, 0)]` is the population of |00> and `rho[(2, 2)]`
//! the population of |10>.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// sigma_z = |e><e| - |g><g|
pub fn sigma_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[-ONE, ZERO, ZERO, ONE])
}

/// sigma_y = i(sigma_+ - sigma_-)
pub fn sigma_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

/// sigma_x = sigma_+ + sigma_-
pub fn sigma_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

/// sigma_- = |g><e|
pub fn sigma_minus() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO])
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn dagger(a: &CMatrix) -> CMatrix {
    a.adjoint()
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn trace(a: &CMatrix) -> Complex64 {
    a.trace()
}

/// Largest absolute entry of `a - a^dagger`.
pub fn hermiticity_defect(a: &CMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * c(0.5, 0.0)
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    let h = hermitian_part(a);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// Check that `rho` is a density matrix: Hermitian, unit trace, positive
/// semidefinite, all within `tol`.
pub fn validate_density_matrix(rho: &CMatrix, tol: f64) -> Result<()> {
    if rho.nrows() != rho.ncols() {
        return Err(Error::InvalidState("matrix is not square".into()));
    }
    let herm = hermiticity_defect(rho);
    if herm > tol {
        return Err(Error::InvalidState(format!(
            "not Hermitian (defect {herm:.3e})"
        )));
    }
    let tr = rho.trace();
    if (tr - ONE).norm() > tol {
        return Err(Error::InvalidState(format!("trace {tr} != 1")));
    }
    let min_ev = hermitian_eigenvalues(rho)[0];
    if min_ev < -tol {
        return Err(Error::InvalidState(format!(
            "negative eigenvalue {min_ev:.3e}"
        )));
    }
    Ok(())
}

/// |psi><psi| for a column vector.
pub fn projector(psi: &[Complex64]) -> CMatrix {
    let n = psi.len();
    CMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj())
}

/// Computational basis state |index><index|.
pub fn basis_projector(dim: usize, index: usize) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    m[(index, index)] = ONE;
    m
}

/// Row-major flattening into a contiguous vector.
pub fn flatten(a: &CMatrix) -> Vec<Complex64> {
    let (r, cdim) = a.shape();
    let mut v = Vec::with_capacity(r * cdim);
    for i in 0..r {
        for j in 0..cdim {
            v.push(a[(i, j)]);
        }
    }
    v
}

pub fn unflatten(v: &[Complex64], dim: usize) -> CMatrix {
    CMatrix::from_row_slice(dim, dim, v)
}

/// Time evolution operator exp(-i H t) for Hermitian H.
pub fn unitary_propagator(h: &CMatrix, t: f64) -> CMatrix {
    let eig = hermitian_part(h).symmetric_eigen();
    let n = h.nrows();
    let phases = CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::from_polar(1.0, -eig.eigenvalues[i] * t)
        } else {
            ZERO
        }
    });
    &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
/// Meant for the small generators used here (Liouvillians up to 16 x 16).
pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let norm = a.iter().map(|z| z.norm()).fold(0.0, f64::max) * n as f64;
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a * c(0.5f64.powi(squarings), 0.0);
    let mut term = identity(n);
    let mut sum = term.clone();
    for k in 1..=24 {
        term = &term * &scaled * c(1.0 / k as f64, 0.0);
        sum += &term;
        if term.iter().all(|z| z.norm() < 1e-18) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Dense row-major d x d kernels used in the hierarchy right-hand side, where
/// matrices live inside a flat state vector.
pub mod flat {
    use num_complex::Complex64;

    /// out += alpha * a * x
    #[inline]
    pub fn gemm_left_acc(out: &mut [Complex64], a: &[Complex64], x: &[Complex64], d: usize, alpha: Complex64) {
        for i in 0..d {
            for k in 0..d {
                let aik = a[i * d + k];
                if aik.re == 0.0 && aik.im == 0.0 {
                    continue;
                }
                let s = alpha * aik;
                for j in 0..d {
                    out[i * d + j] += s * x[k * d + j];
                }
            }
        }
    }

    /// out += alpha * x * a
    #[inline]
    pub fn gemm_right_acc(out: &mut [Complex64], x: &[Complex64], a: &[Complex64], d: usize, alpha: Complex64) {
        for k in 0..d {
            for j in 0..d {
                let akj = a[k * d + j];
                if akj.re == 0.0 && akj.im == 0.0 {
                    continue;
                }
                let s = alpha * akj;
                for i in 0..d {
                    out[i * d + j] += s * x[i * d + k];
                }
            }
        }
    }

    /// out += alpha * [a, x]
    #[inline]
    pub fn commutator_acc(out: &mut [Complex64], a: &[Complex64], x: &[Complex64], d: usize, alpha: Complex64) {
        gemm_left_acc(out, a, x, d, alpha);
        gemm_right_acc(out, x, a, d, -alpha);
    }

    pub fn trace(x: &[Complex64], d: usize) -> Complex64 {
        (0..d).map(|i| x[i * d + i]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_algebra() {
        let y = sigma_y();
        let z = sigma_z();
        let x = sigma_x();
        // ground state first, so [sigma_x, sigma_y] = -2 i sigma_z here
        let comm = commutator(&x, &y);
        assert!((comm + z * c(0.0, 2.0)).norm() < 1e-15);
        // sigma_y = i(sigma_+ - sigma_-)
        let sm = sigma_minus();
        let sp = sm.adjoint();
        assert!(((sp - sm) * I - y).norm() < 1e-15);
    }

    #[test]
    fn flat_kernels_match_dense() {
        let a = kron(&sigma_y(), &identity(2)) + kron(&identity(2), &sigma_x());
        let x = CMatrix::from_fn(4, 4, |i, j| c(i as f64 + 0.5, j as f64 - 1.0));
        let mut out = vec![ZERO; 16];
        flat::commutator_acc(&mut out, &flatten(&a), &flatten(&x), 4, c(0.0, -1.0));
        let expect = commutator(&a, &x) * c(0.0, -1.0);
        assert!((unflatten(&out, 4) - expect).norm() < 1e-13);
    }

    #[test]
    fn density_matrix_validation() {
        assert!(validate_density_matrix(&basis_projector(4, 2), 1e-12).is_ok());
        let mut bad = basis_projector(2, 0);
        bad[(1, 1)] = c(-0.1, 0.0);
        assert!(validate_density_matrix(&bad, 1e-12).is_err());
    }

    #[test]
    fn expm_matches_propagator() {
        let h = kron(&sigma_x(), &sigma_z()) + kron(&sigma_y(), &identity(2)) * c(0.3, 0.0);
        let t = 7.3;
        let a = expm(&(&h * c(0.0, -t)));
        assert!((a - unitary_propagator(&h, t)).norm() < 1e-12);
    }

    #[test]
    fn propagator_is_unitary() {
        let h = kron(&sigma_z(), &identity(2)) + kron(&sigma_y(), &sigma_y()) * c(0.3, 0.0);
        let u = unitary_propagator(&h, 1.7);
        assert!((&u * u.adjoint() - identity(4)).norm() < 1e-12);
    }
}
