//! Second-order time-convolutionless master equation (no secular step):
//!
//! d rho/dt = -i[H, rho] + sum_j ([L_j(t) rho, A_j] + [A_j, rho L_j(t)^dagger]),
//! L_j(t) = int_0^t ds C_j(s) exp(-iHs) A_j exp(iHs).
//!
//! With C_j a sum of exponentials every entry of L_j is a closed-form sum in
//! the eigenbasis of H.

use num_complex::Complex64;
use std::f64::consts::PI;

use super::ContinuumModel;
use crate::decomposition::{compress_bath, matsubara_series, CorrelationSeries, FitConfig};
use crate::error::{Error, Result};
use crate::heom::map_ode_error;
use crate::linalg::{self, CMatrix, I, ZERO};
use crate::ode::{self, IntegratorConfig, OdeRhs};
use crate::spectra::DrudeLorentzBath;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone)]
pub struct Tcl2Channel {
    pub operator: CMatrix,
    pub series: CorrelationSeries,
    /// Weight of a delta-correlated remainder: adds `delta * A` to L(t) for
    /// t > 0. Used for the Matsubara tail beyond the retained poles.
    pub delta: f64,
}

/// Series for the TCL2 kernel of a Drude-Lorentz bath: `n` Matsubara poles
/// plus the summed tail as a delta weight. At zero temperature a compressed
/// fit with six terms is used instead.
pub fn tcl2_kernel(bath: &DrudeLorentzBath, n: usize) -> Result<(CorrelationSeries, f64)> {
    let temp = bath.temperature();
    if temp <= 0.0 {
        let cfg = FitConfig::default();
        return Ok((compress_bath(bath, 6, &cfg)?, 0.0));
    }
    let series = matsubara_series(bath, n)?;
    // int_0^inf c_k e^{-nu_k s} ds = 4 lambda gamma T / (nu_k^2 - gamma^2), summed
    // over all k with sum_{k>=1} 1/(k^2 - x^2) = (1 - pi x cot(pi x)) / (2 x^2)
    let (lam, gam) = (bath.lambda, bath.gamma);
    let a = 2.0 * PI * temp;
    let x = gam / a;
    let full = if x < 1e-4 {
        // series limit: sum 1/k^2 + x^2 sum 1/k^4
        (PI * PI / 6.0 + x * x * PI.powi(4) / 90.0) / (a * a)
    } else {
        (1.0 - PI * x / (PI * x).tan()) / (2.0 * x * x * a * a)
    };
    let partial: f64 = (1..=n).map(|k| 1.0 / ((a * k as f64).powi(2) - gam * gam)).sum();
    Ok((series, 4.0 * lam * gam * temp * (full - partial)))
}

/// (1 - e^{-z t}) / z with the small-|z t| limit.
fn exp_integral(z: Complex64, t: f64) -> Complex64 {
    let zt = z * t;
    if zt.norm() < 1e-4 {
        t * (1.0 - zt / 2.0 + zt * zt / 6.0 - zt * zt * zt / 24.0)
    } else {
        (1.0 - (-zt).exp()) / z
    }
}

#[derive(Debug, Clone)]
struct EigChannel {
    op: CMatrix,
    op_eig: CMatrix,
    terms: Vec<(Complex64, Complex64)>,
    delta: f64,
}

#[derive(Debug, Clone)]
pub struct Tcl2Generator {
    dim: usize,
    h: CMatrix,
    energies: Vec<f64>,
    basis: CMatrix,
    channels: Vec<EigChannel>,
}

impl Tcl2Generator {
    pub fn new(hamiltonian: &CMatrix, channels: &[Tcl2Channel]) -> Result<Self> {
        let d = hamiltonian.nrows();
        if linalg::hermiticity_defect(hamiltonian) > 1e-12 {
            return Err(Error::Domain("Hamiltonian is not Hermitian".into()));
        }
        let eig = linalg::hermitian_part(hamiltonian).symmetric_eigen();
        let basis = eig.eigenvectors.clone();
        let chans = channels
            .iter()
            .map(|ch| {
                if ch.operator.nrows() != d {
                    return Err(Error::DimensionMismatch { expected: d, got: ch.operator.nrows() });
                }
                Ok(EigChannel {
                    op: ch.operator.clone(),
                    op_eig: basis.adjoint() * &ch.operator * &basis,
                    terms: ch.series.terms().iter().map(|t| (t.coefficient, t.rate)).collect(),
                    delta: ch.delta,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dim: d,
            h: hamiltonian.clone(),
            energies: eig.eigenvalues.iter().copied().collect(),
            basis,
            channels: chans,
        })
    }

    /// L_j(t) in the original basis.
    pub fn lambda(&self, channel: usize, t: f64) -> CMatrix {
        let ch = &self.channels[channel];
        let d = self.dim;
        let mut m = CMatrix::zeros(d, d);
        for a in 0..d {
            for b in 0..d {
                let amp = ch.op_eig[(a, b)];
                if amp.norm() == 0.0 {
                    continue;
                }
                let w = self.energies[a] - self.energies[b];
                let mut s = ZERO;
                for &(coef, nu) in &ch.terms {
                    s += coef * exp_integral(nu + I * w, t);
                }
                if t > 0.0 {
                    s += ch.delta;
                }
                m[(a, b)] = amp * s;
            }
        }
        &self.basis * m * self.basis.adjoint()
    }

    pub fn apply(&self, t: f64, rho: &CMatrix) -> CMatrix {
        let mut out = (&self.h * rho - rho * &self.h) * (-I);
        for (j, ch) in self.channels.iter().enumerate() {
            let lam = self.lambda(j, t);
            let lr = &lam * rho;
            let rl = rho * lam.adjoint();
            out += &lr * &ch.op - &ch.op * &lr + &ch.op * &rl - &rl * &ch.op;
        }
        out
    }
}

impl OdeRhs for Tcl2Generator {
    fn len(&self) -> usize {
        self.dim * self.dim
    }

    fn eval(&self, t: f64, y: &[Complex64], dy: &mut [Complex64]) {
        let rho = linalg::unflatten(y, self.dim);
        dy.copy_from_slice(&linalg::flatten(&self.apply(t, &rho)));
    }
}

/// Channels of a continuum model with Matsubara kernels (`n` poles).
pub fn tcl2_channels(model: &ContinuumModel, n: usize) -> Result<Vec<Tcl2Channel>> {
    model
        .channels
        .iter()
        .map(|(op, bath)| {
            let (series, delta) = tcl2_kernel(bath, n)?;
            Ok(Tcl2Channel { operator: op.clone(), series, delta })
        })
        .collect()
}

pub fn tcl2(
    hamiltonian: &CMatrix,
    channels: &[Tcl2Channel],
    rho0: &CMatrix,
    t_end: f64,
    dt_out: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let gen = Tcl2Generator::new(hamiltonian, channels)?;
    let d = gen.dim;
    if rho0.nrows() != d {
        return Err(Error::DimensionMismatch { expected: d, got: rho0.nrows() });
    }
    linalg::validate_density_matrix(rho0, 1e-10)?;
    if !(t_end > 0.0 && dt_out > 0.0) {
        return Err(Error::Domain("t_end and dt_out must be positive".into()));
    }
    let times = ode::uniform_grid(t_end, dt_out);
    let mut raw = Vec::with_capacity(times.len());
    ode::integrate(&gen, linalg::flatten(rho0), &times, cfg, |_, _, y| raw.push(linalg::unflatten(y, d)))
        .map_err(|e| map_ode_error(e, |_| 0))?;
    let traj = Trajectory::from_states("tcl2", times, raw);
    // the generator is traceless; positivity is not guaranteed at second order
    if traj.diagnostics.max_trace_error > 1e-10 {
        return Err(Error::Integration(format!(
            "TCL2 trace drifted by {:.3e}",
            traj.diagnostics.max_trace_error
        )));
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::spectra::{correlation_continuum, CorrelationMethod};

    #[test]
    fn tail_weight_matches_explicit_sum() {
        let bath = DrudeLorentzBath::new(0.1, 7.0, 0.2).unwrap();
        let (s20, d20) = tcl2_kernel(&bath, 20).unwrap();
        let (s2000, d2000) = tcl2_kernel(&bath, 2000).unwrap();
        let int = |s: &CorrelationSeries| -> f64 { s.terms().iter().skip(1).map(|t| (t.coefficient / t.rate).re).sum() };
        assert!(((int(&s20) + d20) - (int(&s2000) + d2000)).abs() < 1e-12);
        assert!(d2000 < d20 && d2000 > 0.0);
    }

    #[test]
    fn lambda_matches_direct_integral() {
        // check the closed form against trapezoid integration of the series
        let bath = DrudeLorentzBath::new(0.1, 2.0, 1.0).unwrap();
        let model = ContinuumModel::single_qubit(1.0, bath);
        let chans = tcl2_channels(&model, 50).unwrap();
        let gen = Tcl2Generator::new(&model.hamiltonian, &chans[..1]).unwrap();
        let t = 3.0;
        let n = 300_000;
        let h = t / n as f64;
        let mut acc = CMatrix::zeros(2, 2);
        for k in 0..=n {
            let s = k as f64 * h;
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            let u = linalg::unitary_propagator(&model.hamiltonian, s);
            let a_s = &u * &model.channels[0].0 * u.adjoint();
            acc += a_s * (chans[0].series.eval(s) * w * h);
        }
        acc += &model.channels[0].0 * c(chans[0].delta, 0.0);
        let lam = gen.lambda(0, t);
        // the t = 0 end of the 50-pole series is steep; trapezoid error ~ h^2 nu^2
        assert!((lam - acc).norm() < 1e-6);
        let _ = correlation_continuum(&bath, 1.0, CorrelationMethod::MatsubaraClosedForm).unwrap();
    }

    #[test]
    fn trace_preserved_and_weak_coupling_decay() {
        let bath = DrudeLorentzBath::new(0.005, 1.0, 0.0).unwrap();
        let model = ContinuumModel::single_qubit(1.0, bath);
        let chans = tcl2_channels(&model, 0).unwrap();
        let rho0 = linalg::basis_projector(2, 1);
        let traj = tcl2(&model.hamiltonian, &chans, &rho0, 40.0, 1.0, &IntegratorConfig::default()).unwrap();
        let k = super::super::transition_rate(&bath, 1.0);
        let p = traj.observable("rho_1_1").unwrap();
        // after the bath memory has decayed the TCL2 rate equals the golden-rule rate
        let measured = -(p[40] / p[20]).ln() / 20.0;
        assert!((measured - k).abs() < 0.02 * k, "{measured} vs {k}");
    }
}
