//! Full-secular GKLS master equation with Drude-Lorentz rates.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{eigenoperators, ContinuumModel};
use crate::decomposition::matsubara_series;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, I, ONE};
use crate::ode::uniform_grid;
use crate::special::bose;
use crate::spectra::{spectral_density, DrudeLorentzBath};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GklsOptions {
    pub lamb_shift: bool,
    /// Matsubara poles used for the principal-value part when the Lamb shift
    /// is on.
    pub lamb_matsubara: usize,
    pub degeneracy_tol: f64,
}

impl Default for GklsOptions {
    fn default() -> Self {
        Self { lamb_shift: false, lamb_matsubara: 400, degeneracy_tol: 1e-9 }
    }
}

/// Fourier transform of C(t) at w: 2 J(w)(n(w) + 1) for w > 0,
/// 2 J(|w|) n(|w|) for w < 0 and the limit 4 lambda T / gamma at w = 0.
pub fn transition_rate(bath: &DrudeLorentzBath, omega: f64) -> f64 {
    let temp = bath.temperature();
    if omega == 0.0 {
        return 4.0 * bath.lambda * temp / bath.gamma;
    }
    let w = omega.abs();
    let n = bose(w, temp);
    let j = spectral_density(bath, w);
    if omega > 0.0 {
        2.0 * j * (n + 1.0)
    } else {
        2.0 * j * n
    }
}

/// Imaginary part of the half-sided transform, sum_k Im c_k / (nu_k - i w),
/// from a Matsubara series.
fn principal_value(bath: &DrudeLorentzBath, omega: f64, n: usize) -> Result<f64> {
    let series = matsubara_series(bath, n)?;
    Ok(series.terms().iter().map(|t| (t.coefficient / (t.rate - I * omega)).im).sum())
}

#[derive(Debug, Clone)]
pub struct Jump {
    pub channel: usize,
    pub omega: f64,
    pub rate: f64,
    pub operator: CMatrix,
}

#[derive(Debug, Clone)]
pub struct GklsGenerator {
    dim: usize,
    pub hamiltonian: CMatrix,
    pub jumps: Vec<Jump>,
    /// Liouvillian acting on row-major vec(rho).
    pub liouvillian: CMatrix,
}

pub fn gkls_generator(model: &ContinuumModel, opts: &GklsOptions) -> Result<GklsGenerator> {
    let d = model.dim();
    let mut h = model.hamiltonian.clone();
    let mut jumps = Vec::new();
    for (j, (op, bath)) in model.channels.iter().enumerate() {
        for (omega, part) in eigenoperators(&model.hamiltonian, op, opts.degeneracy_tol) {
            let rate = transition_rate(bath, omega);
            if opts.lamb_shift {
                let s = principal_value(bath, omega, opts.lamb_matsubara)?;
                h += part.adjoint() * &part * c(s, 0.0);
            }
            jumps.push(Jump { channel: j, omega, rate, operator: part });
        }
    }
    let mut gen = GklsGenerator { dim: d, hamiltonian: h, jumps, liouvillian: CMatrix::zeros(d * d, d * d) };
    for col in 0..d * d {
        let mut e = CMatrix::zeros(d, d);
        e[(col / d, col % d)] = ONE;
        let out = gen.apply(&e);
        for row in 0..d * d {
            gen.liouvillian[(row, col)] = out[(row / d, row % d)];
        }
    }
    Ok(gen)
}

impl GklsGenerator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let mut out = (&self.hamiltonian * rho - rho * &self.hamiltonian) * (-I);
        for jump in &self.jumps {
            if jump.rate == 0.0 {
                continue;
            }
            let a = &jump.operator;
            let ad = a.adjoint();
            let ada = &ad * a;
            out += (a * rho * &ad - (&ada * rho + rho * &ada) * c(0.5, 0.0)) * c(jump.rate, 0.0);
        }
        out
    }

    /// Normalized null vector of the Liouvillian.
    pub fn steady_state(&self) -> Result<CMatrix> {
        let d = self.dim;
        let svd = self.liouvillian.clone().svd(false, true);
        let vt = svd.v_t.ok_or_else(|| Error::Integration("SVD failed".into()))?;
        let (k, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty");
        let v: Vec<Complex64> = vt.row(k).iter().map(|z| z.conj()).collect();
        let rho = linalg::unflatten(&v, d);
        let tr = rho.trace();
        Ok(linalg::hermitian_part(&(rho / tr)))
    }
}

/// Gibbs state exp(-H/T)/Z (ground-state projector at T = 0).
pub fn gibbs_state(h: &CMatrix, temperature: f64) -> CMatrix {
    let eig = linalg::hermitian_part(h).symmetric_eigen();
    let e0 = eig.eigenvalues.min();
    let n = h.nrows();
    let weights: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&e| {
            if temperature > 0.0 {
                (-(e - e0) / temperature).exp()
            } else if (e - e0).abs() < 1e-12 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let z: f64 = weights.iter().sum();
    let mut rho = CMatrix::zeros(n, n);
    for (k, w) in weights.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        rho += &v * v.adjoint() * c(w / z, 0.0);
    }
    rho
}

/// Propagate with exp(L dt) on the uniform output grid.
pub fn gkls_secular(
    model: &ContinuumModel,
    opts: &GklsOptions,
    rho0: &CMatrix,
    t_end: f64,
    dt_out: f64,
) -> Result<Trajectory> {
    let d = model.dim();
    if rho0.nrows() != d {
        return Err(Error::DimensionMismatch { expected: d, got: rho0.nrows() });
    }
    linalg::validate_density_matrix(rho0, 1e-10)?;
    if !(t_end > 0.0 && dt_out > 0.0) {
        return Err(Error::Domain("t_end and dt_out must be positive".into()));
    }
    let gen = gkls_generator(model, opts)?;
    let times = uniform_grid(t_end, dt_out);
    let mut v = nalgebra::DVector::from_vec(linalg::flatten(rho0));
    let mut states = vec![rho0.clone()];
    let mut cached: Option<(f64, CMatrix)> = None;
    for w in times.windows(2) {
        let dt = w[1] - w[0];
        let prop = match &cached {
            Some((h, p)) if (h - dt).abs() <= 1e-14 * dt => p,
            _ => {
                cached = Some((dt, linalg::expm(&(&gen.liouvillian * c(dt, 0.0)))));
                &cached.as_ref().expect("just set").1
            }
        };
        v = prop * v;
        states.push(linalg::unflatten(v.as_slice(), d));
    }
    let traj = Trajectory::from_states("gkls", times, states);
    traj.check(1e-10, 1e-8)?;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detailed_balance() {
        for theta in [0.2, 1.0, 7.0] {
            let bath = DrudeLorentzBath::new(0.1, 7.0, theta).unwrap();
            let ratio = transition_rate(&bath, -1.0) / transition_rate(&bath, 1.0);
            assert!((ratio - (-1.0 / theta).exp()).abs() < 1e-14 * ratio.max(1e-300) + 1e-300);
        }
        let cold = DrudeLorentzBath::new(0.1, 7.0, 0.0).unwrap();
        assert_eq!(transition_rate(&cold, -1.0), 0.0);
    }

    #[test]
    fn gibbs_fixed_point() {
        let bath = DrudeLorentzBath::new(0.1, 7.0, 7.0).unwrap();
        let model = ContinuumModel::two_qubit(1.0, bath);
        let gen = gkls_generator(&model, &GklsOptions::default()).unwrap();
        let gibbs = gibbs_state(&model.hamiltonian, 7.0);
        assert!(gen.apply(&gibbs).norm() < 1e-12);
        let rho0 = linalg::basis_projector(4, 3);
        let traj = gkls_secular(&model, &GklsOptions::default(), &rho0, 2000.0, 100.0).unwrap();
        let last = traj.final_state();
        assert!((last - &gibbs).norm() < 1e-6, "{}", (last - &gibbs).norm());
    }

    #[test]
    fn single_qubit_decay_rate() {
        let bath = DrudeLorentzBath::new(0.01, 1.0, 0.0).unwrap();
        let model = ContinuumModel::single_qubit(1.0, bath);
        let rho0 = linalg::basis_projector(2, 1);
        let traj = gkls_secular(&model, &GklsOptions::default(), &rho0, 10.0, 1.0).unwrap();
        let k = transition_rate(&bath, 1.0);
        for (t, p) in traj.times.iter().zip(traj.observable("rho_1_1").unwrap()) {
            assert!((p - (-k * t).exp()).abs() < 1e-12);
        }
        let ss = gkls_generator(&model, &GklsOptions::default()).unwrap().steady_state().unwrap();
        assert!((ss - linalg::basis_projector(2, 0)).norm() < 1e-10);
    }

    #[test]
    fn lamb_shift_is_hermitian_and_diagonal() {
        let bath = DrudeLorentzBath::new(0.1, 7.0, 1.0).unwrap();
        let model = ContinuumModel::single_qubit(1.0, bath);
        let gen = gkls_generator(&model, &GklsOptions { lamb_shift: true, ..Default::default() }).unwrap();
        assert!(linalg::hermiticity_defect(&gen.hamiltonian) < 1e-14);
        assert!(gen.hamiltonian[(0, 1)].norm() < 1e-14);
    }
}
