//! Drude-Lorentz baths, spectral densities and bath correlation functions.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::{DerivedScales, ModeSet, Parity, Topology};
use crate::error::{Error, Result};
use crate::quad;
use crate::special::{e1_scaled, ei_scaled, thermal_coth};

/// Continuum bath with spectral density 2 lambda gamma omega/(gamma^2 + omega^2).
///
/// `theta` is kT/(hbar omega_ref); rates are in the same angular unit as
/// `omega_ref` (normally omega_ref = omega_q = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrudeLorentzBath {
    pub lambda: f64,
    pub gamma: f64,
    pub theta: f64,
    pub omega_ref: f64,
}

impl DrudeLorentzBath {
    pub fn new(lambda: f64, gamma: f64, theta: f64) -> Result<Self> {
        Self::with_reference(lambda, gamma, theta, 1.0)
    }

    pub fn with_reference(lambda: f64, gamma: f64, theta: f64, omega_ref: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Domain(format!("gamma must be positive, got {gamma}")));
        }
        if !(theta >= 0.0 && theta.is_finite()) {
            return Err(Error::Domain(format!("theta must be non-negative, got {theta}")));
        }
        if !(omega_ref > 0.0) {
            return Err(Error::Domain("reference frequency must be positive".into()));
        }
        Ok(Self { lambda, gamma, theta, omega_ref })
    }

    /// k_B T / hbar in rate units.
    pub fn temperature(&self) -> f64 {
        self.theta * self.omega_ref
    }

    /// coth(omega / 2T) with the zero-temperature limit 1.
    pub fn coth(&self, omega: f64) -> f64 {
        thermal_coth(omega, self.temperature())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitBath {
    pub bath: DrudeLorentzBath,
    /// Long-line (omega_TL << omega_g) approximants of gamma and lambda.
    pub long_line_gamma: f64,
    pub long_line_lambda: f64,
}

/// Drude-Lorentz parameters implied by the circuit, in the units of `scales`.
pub fn bath_from_circuit(scales: &DerivedScales, topology: Topology, theta: f64) -> Result<CircuitBath> {
    let ratio = scales.omega_tl / scales.omega_g;
    let g2 = scales.g_factor * scales.g_factor;
    let (gamma, lambda, ll_lambda_over_gamma) = match topology {
        Topology::TwoQubitSymmetric => {
            let s = (1.0 + 4.0 * ratio).sqrt();
            (scales.omega_g * s / (2.0 * PI), 0.5 * PI * g2 * scales.omega_g / s, PI * PI * g2)
        }
        Topology::SingleQubitShorted => {
            let s = (1.0 + ratio).sqrt();
            (scales.omega_g * s / (2.0 * PI), PI * g2 * scales.omega_g / s, 2.0 * PI * PI * g2)
        }
    };
    let long_line_gamma = scales.omega_g / (2.0 * PI);
    Ok(CircuitBath {
        bath: DrudeLorentzBath::with_reference(lambda, gamma, theta, scales.omega_q)?,
        long_line_gamma,
        long_line_lambda: ll_lambda_over_gamma * long_line_gamma,
    })
}

pub fn spectral_density(bath: &DrudeLorentzBath, omega: f64) -> f64 {
    2.0 * bath.lambda * bath.gamma * omega / (bath.gamma * bath.gamma + omega * omega)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorrelationMethod {
    Quadrature,
    MatsubaraClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSample {
    pub tau: f64,
    pub value: Complex64,
}

/// Imaginary part of the continuum correlation, exact for every temperature.
pub fn correlation_imag_exact(bath: &DrudeLorentzBath, tau: f64) -> f64 {
    -bath.lambda * bath.gamma * (-bath.gamma * tau.abs()).exp() * tau.signum()
}

/// Bath correlation C(tau)/hbar^2 of the continuum. Re C diverges
/// logarithmically at tau = 0 for every temperature, so tau = 0 is an error.
pub fn correlation_continuum(bath: &DrudeLorentzBath, tau: f64, method: CorrelationMethod) -> Result<Complex64> {
    if tau == 0.0 {
        return Err(Error::Divergence(
            "Re C(0) of a Drude-Lorentz bath diverges logarithmically; use tau > 0 or a finite exponential series"
                .into(),
        ));
    }
    if tau < 0.0 {
        return Ok(correlation_continuum(bath, -tau, method)?.conj());
    }
    match method {
        CorrelationMethod::Quadrature => Ok(Complex64::new(
            quadrature_real(bath, tau)?,
            quadrature_imag(bath, tau)?,
        )),
        CorrelationMethod::MatsubaraClosedForm => {
            Ok(Complex64::new(closed_form_real(bath, tau)?, correlation_imag_exact(bath, tau)))
        }
    }
}

/// Re C by series: c_0 e^{-gamma tau} plus the Matsubara sum, whose 1/k part
/// is summed in closed form. At T = 0 the exponential-integral expression.
fn closed_form_real(bath: &DrudeLorentzBath, tau: f64) -> Result<f64> {
    let (lam, gam) = (bath.lambda, bath.gamma);
    let temp = bath.temperature();
    let x = gam * tau;
    if temp <= 0.0 {
        return Ok(-(lam * gam / PI) * (ei_scaled(x) - e1_scaled(x)));
    }
    let ratio = gam / (2.0 * PI * temp);
    let nearest = ratio.round();
    if nearest >= 1.0 && (ratio - nearest).abs() < 1e-9 * ratio.max(1.0) {
        return Err(Error::DegeneratePole { k: nearest as usize });
    }
    let mut value = lam * gam / (gam / (2.0 * temp)).tan() * (-x).exp();
    let a = 2.0 * PI * temp * tau;
    // -(2 lambda gamma / pi) ln(1 - e^{-a})
    value -= (2.0 * lam * gam / PI) * (-(-a).exp()).ln_1p();
    let pref = 2.0 * lam * gam / PI;
    let mut rest = 0.0;
    let mut k = 1usize;
    loop {
        let nu = 2.0 * PI * temp * k as f64;
        let damp = (-nu * tau).exp();
        let term = pref / k as f64 * gam * gam / (nu * nu - gam * gam) * damp;
        rest += term;
        if (nu > 10.0 * gam && term.abs() <= 1e-17 * (value + rest).abs()) || damp == 0.0 || k > 5_000_000 {
            break;
        }
        k += 1;
    }
    Ok(value + rest)
}

fn tail_cutoff(bath: &DrudeLorentzBath, tau: f64) -> f64 {
    // beyond the cutoff coth = 1 to double precision and the integration by
    // parts series converges like powers of 1/(cutoff tau)
    let scale = bath.gamma.max(bath.omega_ref).max(40.0 * bath.temperature());
    let raw = (4.0 * scale).max(1e4 / tau);
    let period = 2.0 * PI / tau;
    (raw / period).ceil() * period
}

fn oscillatory_panels(omega_max: f64, tau: f64) -> usize {
    ((omega_max * tau / PI).ceil() as usize + 16).min(2_000_000)
}

/// Re C = int_0^inf (J/pi) coth cos(omega tau); finite range by adaptive
/// Gauss-Kronrod, the tail (where coth = 1 to double precision) by repeated
/// integration by parts.
fn quadrature_real(bath: &DrudeLorentzBath, tau: f64) -> Result<f64> {
    let omega_max = tail_cutoff(bath, tau);
    let f = |w: f64| {
        if w == 0.0 {
            let t = bath.temperature();
            return if t > 0.0 { 4.0 * bath.lambda * t / (PI * bath.gamma) } else { 0.0 };
        }
        spectral_density(bath, w) / PI * bath.coth(w) * (w * tau).cos()
    };
    let panels = oscillatory_panels(omega_max, tau);
    let r = quad::integrate(f, 0.0, omega_max, 1e-15, 1e-13, panels, panels * 8);
    if !r.value.is_finite() {
        return Err(Error::Integration("non-finite quadrature for Re C".into()));
    }
    let (g, lg) = (bath.gamma, bath.lambda);
    let w = omega_max;
    let d = g * g + w * w;
    let f0 = 2.0 * lg * g * w / (PI * d);
    let f1 = 2.0 * lg * g * (g * g - w * w) / (PI * d * d);
    let f2 = 2.0 * lg * g * 2.0 * w * (w * w - 3.0 * g * g) / (PI * d * d * d);
    let (s, c) = (w * tau).sin_cos();
    // int_W^inf f cos = -f sin/tau - f' cos/tau^2 + f'' sin/tau^3 + ...
    let tail = -f0 * s / tau - f1 * c / (tau * tau) + f2 * s / tau.powi(3);
    Ok(r.value + tail)
}

fn quadrature_imag(bath: &DrudeLorentzBath, tau: f64) -> Result<f64> {
    let omega_max = tail_cutoff(bath, tau);
    let f = |w: f64| -spectral_density(bath, w) / PI * (w * tau).sin();
    let panels = oscillatory_panels(omega_max, tau);
    let r = quad::integrate(f, 0.0, omega_max, 1e-15, 1e-13, panels, panels * 8);
    let (g, lg) = (bath.gamma, bath.lambda);
    let w = omega_max;
    let d = g * g + w * w;
    let f0 = 2.0 * lg * g * w / (PI * d);
    let f1 = 2.0 * lg * g * (g * g - w * w) / (PI * d * d);
    let f2 = 2.0 * lg * g * 2.0 * w * (w * w - 3.0 * g * g) / (PI * d * d * d);
    let (s, c) = (w * tau).sin_cos();
    // int_W^inf f sin = f cos/tau - f' sin/tau^2 - f'' cos/tau^3 + ...
    let tail = f0 * c / tau - f1 * s / (tau * tau) - f2 * c / tau.powi(3);
    Ok(r.value - tail)
}

/// Discrete correlation sum_n g_n^2 [coth cos - i sin] over the given modes.
/// `temperature` is k_B T/hbar in the units of the mode frequencies.
pub fn correlation_discrete(sector: &ModeSet, temperature: f64, tau: f64) -> Complex64 {
    sector
        .modes()
        .iter()
        .map(|m| {
            let (s, c) = (m.omega * tau).sin_cos();
            m.coupling * m.coupling * Complex64::new(thermal_coth(m.omega, temperature) * c, -s)
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuumError {
    pub value: Complex64,
    /// High-temperature short-time estimate (4 lambda / pi gamma) k_B T omega_TL.
    pub linear_t_estimate: f64,
}

/// Contribution of the spectral window [0, omega_TL] that the continuum
/// spuriously fills in.
pub fn continuum_error(bath: &DrudeLorentzBath, omega_tl: f64, tau: f64) -> Result<ContinuumError> {
    if tau < 0.0 {
        return Err(Error::Domain("continuum_error needs tau >= 0".into()));
    }
    let t = bath.temperature();
    let re = |w: f64| {
        if w == 0.0 {
            return if t > 0.0 { 4.0 * bath.lambda * t / (PI * bath.gamma) } else { 0.0 };
        }
        spectral_density(bath, w) / PI * bath.coth(w) * (w * tau).cos()
    };
    let im = |w: f64| -spectral_density(bath, w) / PI * (w * tau).sin();
    let panels = oscillatory_panels(omega_tl, tau.max(1e-300));
    let r = quad::integrate(re, 0.0, omega_tl, 1e-14, 1e-12, panels, panels * 8);
    let i = quad::integrate(im, 0.0, omega_tl, 1e-14, 1e-12, panels, panels * 8);
    Ok(ContinuumError {
        value: Complex64::new(r.value, i.value),
        linear_t_estimate: 4.0 * bath.lambda / (PI * bath.gamma) * t * omega_tl,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub sector: Parity,
    pub spacing: f64,
    /// (n, g_n^2 / (J(omega_n) spacing / pi))
    pub ratios: Vec<(usize, f64)>,
    pub mean_ratio: f64,
    /// (max - min) / mean over the ratios
    pub spread: f64,
    /// max |Re C_discrete - Re C_continuum| over (0, revival/2]
    pub max_re_deviation: f64,
    pub revival_time: f64,
    /// |epsilon_C(0+)|
    pub edge_error: f64,
}

/// Compare the mode couplings with the Drude-Lorentz density they should
/// sample. A constant ratio different from 1 is a global normalization
/// mismatch; it is reported, never corrected.
pub fn consistency_report(modes: &ModeSet, bath: &DrudeLorentzBath, sector: Parity, omega_tl: f64) -> Result<ConsistencyReport> {
    let sec = if sector == Parity::None { modes.clone() } else { modes.sector(sector)? };
    let spacing = match (modes.topology, sector) {
        (Topology::TwoQubitSymmetric, Parity::None) => omega_tl / 2.0,
        (Topology::TwoQubitSymmetric, _) => omega_tl,
        (Topology::SingleQubitShorted, _) => omega_tl / 2.0,
    };
    let ratios: Vec<(usize, f64)> = sec
        .modes()
        .iter()
        .map(|m| (m.index, m.coupling * m.coupling / (spectral_density(bath, m.omega) * spacing / PI)))
        .collect();
    let mean_ratio = ratios.iter().map(|r| r.1).sum::<f64>() / ratios.len() as f64;
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.1), b.max(r.1)));
    let revival_time = 2.0 * PI / spacing;
    let mut max_re_deviation: f64 = 0.0;
    let samples = 200;
    for i in 1..=samples {
        let tau = 0.5 * revival_time * i as f64 / samples as f64;
        let disc = correlation_discrete(&sec, bath.theta * bath.omega_ref, tau);
        let cont = correlation_continuum(bath, tau, CorrelationMethod::MatsubaraClosedForm)?;
        max_re_deviation = max_re_deviation.max((disc.re - cont.re).abs());
    }
    let edge_error = continuum_error(bath, omega_tl, 0.0)?.value.norm();
    Ok(ConsistencyReport {
        sector,
        spacing,
        ratios,
        mean_ratio,
        spread: (hi - lo) / mean_ratio,
        max_re_deviation,
        revival_time,
        edge_error,
    })
}

/// gamma_res/omega_q of the single-qubit resonance locus.
pub fn resonance_locus(theta: f64) -> f64 {
    if theta <= 0.0 || 1.0 / theta > 700.0 {
        return 1.0;
    }
    let a = theta * (1.0 / theta).sinh();
    ((a + 1.0) / (a - 1.0)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{mode_set_two_qubit, DerivedScales};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn circuit_bath_limits() {
        let s = DerivedScales::from_frequencies(1.0, 1e-9, 1.0, 0.02).unwrap();
        let two = bath_from_circuit(&s, Topology::TwoQubitSymmetric, 0.0).unwrap();
        assert!(rel(two.bath.gamma, 1.0 / (2.0 * PI)) < 1e-8);
        assert!(rel(two.bath.lambda, PI * PI * 4e-4 * two.bath.gamma) < 1e-8);
        let one = bath_from_circuit(&s, Topology::SingleQubitShorted, 0.0).unwrap();
        assert!(rel(one.bath.lambda, 2.0 * PI * PI * 4e-4 * one.bath.gamma) < 1e-8);

        let s = DerivedScales::from_frequencies(1.0, 0.1, 1.0, 0.02).unwrap();
        let two = bath_from_circuit(&s, Topology::TwoQubitSymmetric, 0.0).unwrap();
        assert!(rel(two.bath.gamma, 1.4f64.sqrt() / (2.0 * PI)) < 1e-14);
    }

    #[test]
    fn spectral_density_values() {
        let b = DrudeLorentzBath::new(0.3, 2.0, 0.0).unwrap();
        assert!(rel(spectral_density(&b, 2.0), 0.3) < 1e-15);
        assert_eq!(spectral_density(&b, 0.0), 0.0);
        assert!(rel(spectral_density(&b, 20.0) / 0.3, 20.0 / 101.0) < 1e-14);
    }

    #[test]
    fn quadrature_matches_closed_form() {
        for &(gamma, theta) in &[(0.2, 7.0), (7.0, 7.0), (7.0, 0.2), (1.0, 0.0), (3.0, 0.5)] {
            let b = DrudeLorentzBath::new(0.1, gamma, theta).unwrap();
            for &x in &[1e-3, 0.03, 1.0, 7.0, 100.0] {
                let tau = x / gamma;
                let q = correlation_continuum(&b, tau, CorrelationMethod::Quadrature).unwrap();
                let m = correlation_continuum(&b, tau, CorrelationMethod::MatsubaraClosedForm).unwrap();
                // relative agreement, floored at the quadrature's absolute accuracy
                assert!((q - m).norm() <= 1e-6 * m.norm() + 1e-12, "gamma {gamma} theta {theta} x {x}: {q} vs {m}");
                assert!((q.im + 0.1 * gamma * (-x).exp()).abs() <= 1e-6 * 0.1 * gamma * (-x).exp() + 1e-12);
            }
        }
    }

    #[test]
    fn zero_tau_diverges() {
        let b = DrudeLorentzBath::new(0.1, 1.0, 0.0).unwrap();
        assert!(matches!(
            correlation_continuum(&b, 0.0, CorrelationMethod::Quadrature),
            Err(Error::Divergence(_))
        ));
    }

    #[test]
    fn high_temperature_limit() {
        let b = DrudeLorentzBath::new(0.1, 1.0, 100.0).unwrap();
        for &tau in &[0.5, 1.0, 3.0] {
            let c = correlation_continuum(&b, tau, CorrelationMethod::MatsubaraClosedForm).unwrap();
            let classical = 2.0 * 0.1 * 100.0 * (-tau).exp();
            assert!(rel(c.re, classical) < 0.01);
        }
    }

    #[test]
    fn conjugate_symmetry() {
        let b = DrudeLorentzBath::new(0.1, 2.0, 0.7).unwrap();
        let p = correlation_continuum(&b, 0.4, CorrelationMethod::MatsubaraClosedForm).unwrap();
        let m = correlation_continuum(&b, -0.4, CorrelationMethod::MatsubaraClosedForm).unwrap();
        assert!((p.conj() - m).norm() < 1e-15);
    }

    #[test]
    fn pole_collision_reported() {
        let b = DrudeLorentzBath::new(0.1, 2.0 * PI * 0.5, 0.5).unwrap();
        assert!(matches!(
            correlation_continuum(&b, 1.0, CorrelationMethod::MatsubaraClosedForm),
            Err(Error::DegeneratePole { k: 1 })
        ));
    }

    #[test]
    fn discrete_periodicity() {
        let s = DerivedScales::from_frequencies(1.0, 0.3, 1.0, 0.02).unwrap();
        let modes = mode_set_two_qubit(&s, 40).unwrap();
        for parity in [Parity::Even, Parity::Odd] {
            let sec = modes.sector(parity).unwrap();
            let single = correlation_discrete(&sec, 0.0, 0.37);
            let period = 2.0 * PI / 0.3;
            let shifted = correlation_discrete(&sec, 0.0, 0.37 + period);
            let sign = if parity == Parity::Odd { -1.0 } else { 1.0 };
            // odd sector frequencies are half-integer multiples of omega_TL
            assert!((shifted - single * sign).norm() < 1e-12 * single.norm().max(1.0));
            let twice = correlation_discrete(&sec, 0.0, 0.37 + 2.0 * period);
            assert!((twice - single).norm() < 1e-12 * single.norm().max(1.0));
        }
        let one = ModeSet::new(Topology::TwoQubitSymmetric, vec![modes.modes()[0]]).unwrap();
        let m = modes.modes()[0];
        let c = correlation_discrete(&one, 0.0, 2.1);
        let e = Complex64::from_polar(m.coupling * m.coupling, -m.omega * 2.1);
        assert!((c - e).norm() < 1e-16);
    }

    #[test]
    fn continuum_error_properties() {
        let b = DrudeLorentzBath::new(0.1, 1.0, 2.0).unwrap();
        assert!(continuum_error(&b, 1e-12, 0.3).unwrap().value.norm() < 1e-10);
        let cold = DrudeLorentzBath::new(0.1, 1.0, 0.0).unwrap();
        let a = continuum_error(&b, 0.05, 1.3).unwrap().value.im;
        let c = continuum_error(&cold, 0.05, 1.3).unwrap().value.im;
        assert_eq!(a, c);
        let hot = DrudeLorentzBath::new(0.1, 1.0, 50.0).unwrap();
        let e = continuum_error(&hot, 0.05, 0.1).unwrap();
        assert!(rel(e.value.re, e.linear_t_estimate) < 0.1);
    }

    #[test]
    fn continuum_error_is_additive() {
        let b = DrudeLorentzBath::new(0.1, 1.0, 0.5).unwrap();
        let (tau, wtl) = (0.8, 0.3);
        let full = correlation_continuum(&b, tau, CorrelationMethod::Quadrature).unwrap();
        let head = continuum_error(&b, wtl, tau).unwrap().value;
        let big = 1e3 * 2.0 * PI / tau;
        let f = |w: f64| spectral_density(&b, w) / PI * b.coth(w) * (w * tau).cos();
        let body = quad::integrate(f, wtl, big, 1e-13, 1e-13, 2000, 200_000).value;
        // tail beyond `big` by integration by parts (coth = 1 there)
        let d = 1.0 + big * big;
        let tail = -(2.0 * 0.1 * big / (PI * d)) * (big * tau).sin() / tau
            - (2.0 * 0.1 * (1.0 - big * big) / (PI * d * d)) * (big * tau).cos() / (tau * tau);
        assert!((full.re - head.re - body - tail).abs() < 1e-8);
    }

    #[test]
    fn sector_consistency_ratio() {
        let s = DerivedScales::from_frequencies(1.0, 0.1, 1.0, 0.02).unwrap();
        let modes = mode_set_two_qubit(&s, 30).unwrap();
        let bath = bath_from_circuit(&s, Topology::TwoQubitSymmetric, 0.0).unwrap().bath;
        let rep = consistency_report(&modes, &bath, Parity::Odd, s.omega_tl).unwrap();
        assert!(rep.spread < 1e-12);
        assert!(rel(rep.mean_ratio, 1.0 / (2.0 * PI)) < 1e-12);
        assert!(rel(rep.revival_time, 2.0 * PI / 0.1) < 1e-14);
    }

    #[test]
    fn locus_properties() {
        assert!((resonance_locus(0.01) - 1.0).abs() < 1e-12);
        assert_eq!(resonance_locus(0.0), 1.0);
        assert!(rel(resonance_locus(10.0), 2.0 * 3f64.sqrt() * 10.0) < 0.02);
        let mut prev = resonance_locus(0.05);
        for i in 2..=200 {
            let v = resonance_locus(0.05 * i as f64);
            assert!(v > prev);
            prev = v;
        }
    }
}
