//! Circuit parameters, derived frequency scales, transmission-line mode sets
//! and the regime classification.
//!
//! All functions are unit-agnostic: frequencies come out in whatever angular
//! unit the scales were expressed in. [`DerivedScales::normalized`] rescales
//! to units of the qubit frequency, which is what the dynamics solvers use.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planck constant (J s).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Elementary charge (C).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Cooper-pair resistance quantum h/(2e)^2, about 6.45 kOhm.
pub fn resistance_quantum() -> f64 {
    PLANCK / (4.0 * ELEMENTARY_CHARGE * ELEMENTARY_CHARGE)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Topology {
    /// Two identical qubits at both ends of an open line.
    TwoQubitSymmetric,
    /// One qubit at x = 0 of a line shorted at x = d.
    SingleQubitShorted,
}

impl Topology {
    pub fn system_dimension(self) -> usize {
        match self {
            Topology::TwoQubitSymmetric => 4,
            Topology::SingleQubitShorted => 2,
        }
    }
}

/// Raw circuit elements in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    /// Qubit shunt capacitance C (F).
    pub shunt_capacitance: f64,
    /// Qubit-line coupling capacitance C_g (F).
    pub coupling_capacitance: f64,
    /// Line characteristic impedance (Ohm).
    pub impedance: f64,
    /// Phase velocity (m/s).
    pub phase_velocity: f64,
    /// Line length d (m).
    pub length: f64,
    /// Cooper-pair-number transition matrix element n_T.
    pub transition_element: f64,
    /// Qubit angular frequency (rad/s).
    pub qubit_frequency: f64,
    pub topology: Topology,
}

impl CircuitParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("shunt_capacitance", self.shunt_capacitance),
            ("coupling_capacitance", self.coupling_capacitance),
            ("impedance", self.impedance),
            ("phase_velocity", self.phase_velocity),
            ("length", self.length),
            ("transition_element", self.transition_element),
            ("qubit_frequency", self.qubit_frequency),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Per-unit-length capacitance c = 1/(zeta v_p).
    pub fn capacitance_per_length(&self) -> f64 {
        1.0 / (self.impedance * self.phase_velocity)
    }

    /// Per-unit-length inductance l = zeta / v_p.
    pub fn inductance_per_length(&self) -> f64 {
        self.impedance / self.phase_velocity
    }
}

/// The three frequency scales and the dimensionless coupling prefactor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedScales {
    /// Effective capacitance C_Pi (F); absent when the scales were specified
    /// directly as frequencies.
    pub c_pi: Option<f64>,
    pub omega_tl: f64,
    pub tau_tl: f64,
    pub omega_g: f64,
    pub tau_g: f64,
    pub g_factor: f64,
    pub omega_q: f64,
}

impl DerivedScales {
    /// Build scales directly from the frequencies and G.
    pub fn from_frequencies(omega_q: f64, omega_tl: f64, omega_g: f64, g_factor: f64) -> Result<Self> {
        for (name, v) in [("omega_q", omega_q), ("omega_tl", omega_tl), ("omega_g", omega_g), ("G", g_factor)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            c_pi: None,
            omega_tl,
            tau_tl: 2.0 * PI / omega_tl,
            omega_g,
            tau_g: 2.0 * PI / omega_g,
            g_factor,
            omega_q,
        })
    }

    /// Same scales expressed in units of omega_q (omega_q = 1).
    pub fn normalized(&self) -> Self {
        let w = self.omega_q;
        Self {
            c_pi: self.c_pi,
            omega_tl: self.omega_tl / w,
            tau_tl: self.tau_tl * w,
            omega_g: self.omega_g / w,
            tau_g: self.tau_g * w,
            g_factor: self.g_factor,
            omega_q: 1.0,
        }
    }

    /// C_Pi/(c d) = omega_TL/omega_g, the boundary-capacitance ratio that
    /// enters the mode shapes.
    pub fn boundary_ratio(&self) -> f64 {
        self.omega_tl / self.omega_g
    }
}

pub fn effective_capacitance(c: f64, c_g: f64) -> Result<f64> {
    if !(c > 0.0 && c_g > 0.0) {
        return Err(Error::Domain(format!(
            "capacitances must be positive (C = {c}, C_g = {c_g})"
        )));
    }
    Ok(c * c_g / (c + c_g))
}

pub fn derived_scales(params: &CircuitParams) -> Result<DerivedScales> {
    params.validate()?;
    let c_pi = effective_capacitance(params.shunt_capacitance, params.coupling_capacitance)?;
    let tau_tl = params.length / params.phase_velocity;
    let tau_g = params.impedance * c_pi;
    let g_factor = (1.0 / (2.0 * PI)).sqrt()
        * params.transition_element
        * (c_pi / params.shunt_capacitance)
        * (params.impedance / resistance_quantum()).sqrt();
    Ok(DerivedScales {
        c_pi: Some(c_pi),
        omega_tl: 2.0 * PI / tau_tl,
        tau_tl,
        omega_g: 2.0 * PI / tau_g,
        tau_g,
        g_factor,
        omega_q: params.qubit_frequency,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
    None,
}

impl Parity {
    pub fn label(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
            Parity::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub index: usize,
    pub omega: f64,
    pub coupling: f64,
    pub parity: Parity,
    /// Boundary value u_n(0) of the normalized mode function (dimensionless).
    pub boundary_amplitude: f64,
}

/// Immutable, index-ordered set of line modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSet {
    pub topology: Topology,
    modes: Vec<Mode>,
}

impl ModeSet {
    pub fn new(topology: Topology, modes: Vec<Mode>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::EmptyModeSet);
        }
        Ok(Self { topology, modes })
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Mode> {
        self.modes.iter().find(|m| m.index == index)
    }

    /// Modes of one parity sector; `Err(EmptyModeSet)` if none remain.
    pub fn sector(&self, parity: Parity) -> Result<ModeSet> {
        let modes: Vec<Mode> = self.modes.iter().copied().filter(|m| m.parity == parity).collect();
        ModeSet::new(self.topology, modes)
    }

    /// Keep only the listed mode indices (in index order).
    pub fn subset(&self, indices: &[usize]) -> Result<ModeSet> {
        let modes: Vec<Mode> = self
            .modes
            .iter()
            .copied()
            .filter(|m| indices.contains(&m.index))
            .collect();
        ModeSet::new(self.topology, modes)
    }

    /// Same modes with frequencies and couplings divided by `omega_ref`.
    pub fn rescaled(&self, omega_ref: f64) -> ModeSet {
        let modes = self
            .modes
            .iter()
            .map(|m| Mode {
                omega: m.omega / omega_ref,
                coupling: m.coupling / omega_ref,
                ..*m
            })
            .collect();
        ModeSet { topology: self.topology, modes }
    }
}

/// Eq.-(20)-type coupling for the symmetric two-qubit line.
pub fn two_qubit_coupling(scales: &DerivedScales, omega_n: f64) -> f64 {
    let x = 2.0 * PI * omega_n / scales.omega_g;
    let denom = x * x + 4.0 * scales.omega_tl / scales.omega_g + 1.0;
    scales.g_factor * (scales.omega_tl * omega_n / denom).sqrt()
}

/// Coupling of mode `omega_n` to the qubit on a shorted line.
pub fn single_qubit_coupling(scales: &DerivedScales, omega_n: f64) -> f64 {
    let x = 2.0 * PI * omega_n / scales.omega_g;
    let denom = x * x + scales.omega_tl / scales.omega_g + 1.0;
    (2.0 * PI).sqrt() * scales.g_factor * (scales.omega_tl * omega_n / denom).sqrt()
}

pub fn mode_set_two_qubit(scales: &DerivedScales, count: usize) -> Result<ModeSet> {
    if count == 0 {
        return Err(Error::EmptyModeSet);
    }
    let r = scales.boundary_ratio();
    let modes = (1..=count)
        .map(|n| {
            let kd = n as f64 * PI;
            let omega = n as f64 * scales.omega_tl / 2.0;
            let amp = (2.0 * r / (1.0 + kd * kd * r * r + 4.0 * r)).sqrt();
            Mode {
                index: n,
                omega,
                coupling: two_qubit_coupling(scales, omega),
                parity: if n % 2 == 0 { Parity::Even } else { Parity::Odd },
                boundary_amplitude: amp,
            }
        })
        .collect();
    ModeSet::new(Topology::TwoQubitSymmetric, modes)
}

/// Root of cot(x) = r x in ((n-1) pi, (n - 1/2) pi]: bisection to a tight
/// bracket, then Newton polish.
pub fn shorted_line_root(n: usize, r: f64) -> Result<f64> {
    assert!(n >= 1);
    let lo0 = (n as f64 - 1.0) * PI;
    let hi0 = (n as f64 - 0.5) * PI;
    if r <= 0.0 {
        return Ok(hi0);
    }
    // f(x) = cos x - r x sin x has the same roots on the bracket and no poles
    let f = |x: f64| x.cos() - r * x * x.sin();
    let sign = |x: f64| if n % 2 == 1 { f(x) } else { -f(x) };
    let mut lo = lo0;
    let mut hi = hi0;
    if !(sign(lo) > 0.0 && sign(hi) <= 0.0) {
        return Err(Error::RootBracket { n });
    }
    if sign(hi) == 0.0 {
        return Ok(hi);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if sign(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-6 * hi.max(1.0) {
            break;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..50 {
        let fx = f(x);
        let dfx = -x.sin() - r * (x.sin() + x * x.cos());
        let next = x - fx / dfx;
        let next = if next <= lo || next >= hi { 0.5 * (lo + hi) } else { next };
        if sign(next) > 0.0 {
            lo = next;
        } else {
            hi = next;
        }
        let done = (next - x).abs() <= 1e-14 * next.abs();
        x = next;
        if done {
            break;
        }
    }
    if !(x > lo0 && x <= hi0) || (hi - lo) > 1e-12 * x.max(1.0) && f(x).abs() > 1e-12 {
        return Err(Error::RootBracket { n });
    }
    Ok(x)
}

pub fn mode_set_single_qubit(scales: &DerivedScales, count: usize, exact: bool) -> Result<ModeSet> {
    if count == 0 {
        return Err(Error::EmptyModeSet);
    }
    let r = scales.boundary_ratio();
    let mut modes = Vec::with_capacity(count);
    for n in 1..=count {
        let kd = if exact {
            shorted_line_root(n, r)?
        } else {
            (2.0 * n as f64 - 1.0) * PI / 2.0
        };
        // omega_n = v_p k_n = (omega_TL / 2 pi) (k_n d)
        let omega = scales.omega_tl * kd / (2.0 * PI);
        let amp = (2.0 * r / (1.0 + r * r * kd * kd + r)).sqrt();
        modes.push(Mode {
            index: n,
            omega,
            coupling: single_qubit_coupling(scales, omega),
            parity: Parity::None,
            boundary_amplitude: amp,
        });
    }
    ModeSet::new(Topology::SingleQubitShorted, modes)
}

/// Large-spacing asymptote G omega_g / (pi sqrt(2n)) of the two-qubit coupling,
/// valid only for omega_g << omega_TL.
pub fn short_line_coupling(g_factor: f64, omega_g: f64, n: usize) -> f64 {
    g_factor * omega_g / (PI * (2.0 * n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeKind {
    LongLineContinuum,
    CombEdgeDiscreteDispersive,
    CombEdgeDiscreteResonant,
    ShortLineSingleMode,
    GeneralDiscrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeLabel {
    pub kind: RegimeKind,
    pub omega_g_over_tl: f64,
    pub omega_q_over_tl: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeThresholds {
    /// Factor that turns "a << b" into "a * margin <= b".
    pub margin: f64,
    /// Comb edge extends up to omega_q <= omega_TL (1 + slack).
    pub comb_edge_slack: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self { margin: 10.0, comb_edge_slack: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaEntry {
    pub index: usize,
    /// g_n/|Delta_n|; `None` for modes flagged resonant.
    pub eta: Option<f64>,
    pub resonant: bool,
}

pub fn eta_profile(modes: &ModeSet, omega_q: f64, resonance_tol: f64) -> Vec<EtaEntry> {
    modes
        .modes()
        .iter()
        .map(|m| {
            let detuning = omega_q - m.omega;
            if detuning.abs() < resonance_tol {
                EtaEntry { index: m.index, eta: None, resonant: true }
            } else {
                EtaEntry { index: m.index, eta: Some(m.coupling / detuning.abs()), resonant: false }
            }
        })
        .collect()
}

/// Default resonance tolerance omega_TL / 100.
pub fn default_resonance_tol(omega_tl: f64) -> f64 {
    omega_tl / 100.0
}

/// Classify the operating region. `eta` decides the comb-edge sub-kind: any
/// flagged-resonant mode or any eta_n >= 1 makes it resonant.
pub fn classify_regime(
    omega_q: f64,
    omega_g: f64,
    omega_tl: f64,
    thresholds: RegimeThresholds,
    eta: Option<&[EtaEntry]>,
) -> RegimeLabel {
    let m = thresholds.margin;
    let kind = if omega_g * m <= omega_tl {
        RegimeKind::ShortLineSingleMode
    } else if omega_tl * m <= omega_g && omega_tl * m <= omega_q {
        RegimeKind::LongLineContinuum
    } else if omega_tl * m <= omega_g && omega_q <= omega_tl * (1.0 + thresholds.comb_edge_slack) {
        let resonant = eta
            .map(|entries| {
                entries
                    .iter()
                    .any(|e| e.resonant || e.eta.is_some_and(|v| v >= 1.0))
            })
            .unwrap_or(false);
        if resonant {
            RegimeKind::CombEdgeDiscreteResonant
        } else {
            RegimeKind::CombEdgeDiscreteDispersive
        }
    } else {
        RegimeKind::GeneralDiscrete
    };
    RegimeLabel {
        kind,
        omega_g_over_tl: omega_g / omega_tl,
        omega_q_over_tl: omega_q / omega_tl,
        margin: m,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;

    fn femto(x: f64) -> f64 {
        x * 1e-15
    }

    #[test]
    fn effective_capacitance_examples() {
        assert!((effective_capacitance(femto(100.0), femto(100.0)).unwrap() - femto(50.0)).abs() < 1e-27);
        let c = femto(100.0);
        let limit = effective_capacitance(c, 1e6 * c).unwrap();
        assert!((limit / c - 1.0).abs() < 1e-5);
        let cpi = effective_capacitance(femto(200.0), femto(1.005025)).unwrap();
        assert!((cpi / femto(1.0) - 1.0).abs() < 1e-6);
        assert!(effective_capacitance(0.0, c).is_err());
        assert!(effective_capacitance(c, -1.0).is_err());
    }

    fn appendix_params() -> CircuitParams {
        // C_Pi = 50 fF with C = 500 fF (C_Pi / C = 0.1)
        let c = femto(500.0);
        let c_g = c * 50.0 / 450.0;
        CircuitParams {
            shunt_capacitance: c,
            coupling_capacitance: c_g,
            impedance: 50.0,
            phase_velocity: 1e8,
            length: 0.01,
            transition_element: 1.0,
            qubit_frequency: 2.0 * PI * 5e9,
            topology: Topology::TwoQubitSymmetric,
        }
    }

    #[test]
    fn derived_scale_examples() {
        let s = derived_scales(&appendix_params()).unwrap();
        assert!((s.c_pi.unwrap() / femto(50.0) - 1.0).abs() < 1e-12);
        assert!((s.tau_g - 2.5e-12).abs() < 1e-24);
        assert!((s.omega_g / (2.0 * PI) / 400e9 - 1.0).abs() < 1e-12);
        assert!((s.omega_tl / (2.0 * PI) / 10e9 - 1.0).abs() < 1e-12);
        assert!((s.g_factor - 3.51e-3).abs() < 0.01e-3, "G = {}", s.g_factor);
        assert!((s.omega_tl * s.tau_tl - 2.0 * PI).abs() < 1e-12);
        assert!((s.omega_g * s.tau_g - 2.0 * PI).abs() < 1e-12);
        assert!(s.c_pi.unwrap() < femto(500.0).min(s.c_pi.unwrap() * 1.0 + femto(5.6)));
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = appendix_params();
        p.length = 0.0;
        assert!(derived_scales(&p).is_err());
    }

    fn ratio_scales(tl_over_g: f64, g: f64) -> DerivedScales {
        DerivedScales::from_frequencies(1.0, tl_over_g, 1.0, g).unwrap()
    }

    #[test]
    fn two_qubit_modes() {
        let s = ratio_scales(10.0, 0.37);
        let set = mode_set_two_qubit(&s, 12).unwrap();
        let g1 = set.modes()[0].coupling;
        let expect = 0.37 * (50.0 / ((10.0 * PI).powi(2) + 41.0)).sqrt();
        assert!((g1 - expect).abs() < 1e-14);
        assert!((g1 / 0.37 - 0.2205).abs() < 1e-4);
        for m in set.modes() {
            assert_eq!(m.parity == Parity::Even, m.index % 2 == 0);
            assert!(m.coupling > 0.0);
            assert!((m.omega - m.index as f64 * 5.0).abs() < 1e-12);
        }
        for sector in [Parity::Even, Parity::Odd] {
            let sec = set.sector(sector).unwrap();
            for w in sec.modes().windows(2) {
                assert!((w[1].omega - w[0].omega - s.omega_tl).abs() < 1e-12);
            }
        }
        assert!(matches!(mode_set_two_qubit(&s, 0), Err(Error::EmptyModeSet)));
    }

    /// u_n(x) = A [cos(kx) - alpha k sin(kx)] on d = 1, alpha = omega_TL/omega_g
    #[test]
    fn mode_parity_and_normalization() {
        let s = ratio_scales(0.3, 0.01);
        let alpha = s.boundary_ratio();
        let set = mode_set_two_qubit(&s, 6).unwrap();
        for m in set.modes() {
            let k = m.index as f64 * PI;
            let a = m.boundary_amplitude;
            let u = |x: f64| a * ((k * x).cos() - alpha * k * (k * x).sin());
            assert!((u(0.0) - a).abs() < 1e-15);
            let sign = if m.index % 2 == 0 { 1.0 } else { -1.0 };
            assert!((u(1.0) - sign * u(0.0)).abs() < 1e-12);
            let integral = quad::integrate(|x| u(x) * u(x), 0.0, 1.0, 1e-15, 1e-14, 16, 10_000).value;
            let norm = alpha * (u(0.0).powi(2) + u(1.0).powi(2)) + integral;
            assert!((norm / alpha - 1.0).abs() < 1e-10, "n = {}: {}", m.index, norm / alpha);
        }
    }

    #[test]
    fn single_qubit_roots() {
        let tiny = ratio_scales(1e-8, 0.01);
        let exact = mode_set_single_qubit(&tiny, 20, true).unwrap();
        let approx = mode_set_single_qubit(&tiny, 20, false).unwrap();
        for (e, a) in exact.modes().iter().zip(approx.modes()) {
            assert!((e.omega / a.omega - 1.0).abs() < 1e-6);
            assert_eq!(e.parity, Parity::None);
        }
        for w in approx.modes().windows(2) {
            assert!((w[1].omega - w[0].omega - tiny.omega_tl / 2.0).abs() < 1e-20);
        }
        for r in [0.01, 0.3, 2.0, 10.0] {
            let s = ratio_scales(r, 0.01);
            let set = mode_set_single_qubit(&s, 15, true).unwrap();
            for m in set.modes() {
                let kd = m.omega * 2.0 * PI / s.omega_tl;
                let n = m.index as f64;
                assert!(kd > (n - 1.0) * PI && kd < (2.0 * n - 1.0) * PI / 2.0);
                assert!((1.0 / kd.tan() - r * kd).abs() < 1e-9 * (1.0 + r * kd));
            }
            for w in set.modes().windows(2) {
                assert!(w[1].omega > w[0].omega);
            }
        }
    }

    #[test]
    fn single_qubit_normalization() {
        let s = ratio_scales(0.5, 0.01);
        let alpha = s.boundary_ratio();
        let set = mode_set_single_qubit(&s, 5, true).unwrap();
        for m in set.modes() {
            let kd = m.omega * 2.0 * PI / s.omega_tl;
            let a = m.boundary_amplitude / kd.sin();
            let integral =
                quad::integrate(|x| (a * (kd * (1.0 - x)).sin()).powi(2), 0.0, 1.0, 1e-15, 1e-14, 16, 10_000)
                    .value;
            let norm = alpha * m.boundary_amplitude.powi(2) + integral;
            assert!((norm / alpha - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn short_line_asymptote() {
        let g = 0.02;
        assert!((short_line_coupling(g, 1.0, 1) / short_line_coupling(g, 1.0, 4) - 2.0).abs() < 1e-14);
        let s = ratio_scales(10.0, g);
        let exact = mode_set_two_qubit(&s, 1).unwrap().modes()[0].coupling;
        let asym = short_line_coupling(g, 1.0, 1);
        assert!((asym / exact - 1.0).abs() < 0.03);
        assert!((asym / g - 0.2251).abs() < 1e-4);
        assert!(short_line_coupling(g, 1.0, 1_000_000_000) < 1e-6);
    }

    #[test]
    fn coupling_profile_shape() {
        let s = ratio_scales(0.01, 1.0);
        let set = mode_set_two_qubit(&s, 20_000).unwrap();
        let gs: Vec<f64> = set.modes().iter().map(|m| m.coupling).collect();
        let peak = gs.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!(peak > 0 && peak < gs.len() - 1);
        assert!(gs[..=peak].windows(2).all(|w| w[1] > w[0]));
        assert!(gs[peak..].windows(2).all(|w| w[1] < w[0]));
        // omega^{-1/2} tail
        let (a, b) = (&set.modes()[9_999], &set.modes()[19_999]);
        let slope = (b.coupling / a.coupling).ln() / (b.omega / a.omega).ln();
        assert!((slope + 0.5).abs() < 0.01);
    }

    #[test]
    fn regime_examples() {
        let t = RegimeThresholds::default();
        assert_eq!(classify_regime(10.0, 10.0, 1.0, t, None).kind, RegimeKind::LongLineContinuum);
        for wq in [0.01, 1.0, 100.0] {
            assert_eq!(classify_regime(wq, 0.1, 1.0, t, None).kind, RegimeKind::ShortLineSingleMode);
        }
        let omega_tl = 0.8;
        let s = DerivedScales::from_frequencies(1.0, omega_tl, omega_tl / 3.2e-3, 2.2e-2).unwrap();
        let modes = mode_set_two_qubit(&s, 15).unwrap();
        let eta = eta_profile(&modes, 1.0, default_resonance_tol(omega_tl));
        let label = classify_regime(1.0, s.omega_g, omega_tl, t, Some(&eta));
        assert_eq!(label.kind, RegimeKind::CombEdgeDiscreteDispersive);
        assert!((label.omega_q_over_tl - 1.25).abs() < 1e-12);
    }

    #[test]
    fn eta_profile_behaviour() {
        let omega_tl = 2.0 / 3.0;
        let s = DerivedScales::from_frequencies(1.0, omega_tl, omega_tl / 2.7e-3, 2.2e-2).unwrap();
        let modes = mode_set_two_qubit(&s, 10).unwrap();
        let eta = eta_profile(&modes, 1.0, default_resonance_tol(omega_tl));
        assert!(eta[2].resonant && eta[2].eta.is_none());
        assert!(eta.iter().filter(|e| e.resonant).count() == 1);
        let label = classify_regime(1.0, s.omega_g, omega_tl, RegimeThresholds::default(), Some(&eta));
        assert_eq!(label.kind, RegimeKind::CombEdgeDiscreteResonant);

        // dispersive comb edge: beyond the two modes nearest omega_q, eta decays
        let omega_tl = 0.8;
        let s = DerivedScales::from_frequencies(1.0, omega_tl, omega_tl / 3.2e-3, 2.2e-2).unwrap();
        let modes = mode_set_two_qubit(&s, 15).unwrap();
        let eta: Vec<f64> = eta_profile(&modes, 1.0, default_resonance_tol(omega_tl))
            .iter()
            .map(|e| e.eta.unwrap())
            .collect();
        assert!(eta[2..].windows(2).all(|w| w[1] < w[0]));
        assert!(eta[0] < eta[1]);

        let zero = ModeSet::new(
            Topology::TwoQubitSymmetric,
            vec![Mode { index: 1, omega: 0.5, coupling: 0.0, parity: Parity::Odd, boundary_amplitude: 0.1 }],
        )
        .unwrap();
        assert_eq!(eta_profile(&zero, 1.0, 0.01)[0].eta, Some(0.0));
    }
}
