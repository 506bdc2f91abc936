//! Scenario documents: parsing, defaults, validation and model resolution.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use qline::circuit::{
    self, classify_regime, default_resonance_tol, derived_scales, eta_profile, CircuitParams, DerivedScales, ModeSet,
    Parity, RegimeKind, RegimeLabel, RegimeThresholds, Topology,
};
use qline::linalg::{self, CMatrix};
use qline::spectra::{bath_from_circuit, DrudeLorentzBath};
use serde::{Deserialize, Serialize};

use crate::units::{parse_quantity, Unit};
use crate::CliError;

const HBAR: f64 = 1.054_571_817e-34;
const K_B: f64 = 1.380_649e-23;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologySpec {
    TwoQubit,
    SingleQubit,
}

impl From<TopologySpec> for Topology {
    fn from(t: TopologySpec) -> Self {
        match t {
            TopologySpec::TwoQubit => Topology::TwoQubitSymmetric,
            TopologySpec::SingleQubit => Topology::SingleQubitShorted,
        }
    }
}

/// Raw circuit elements with unit-suffixed strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSpec {
    #[serde(rename = "C")]
    pub c: String,
    #[serde(rename = "C_g")]
    pub c_g: String,
    #[serde(rename = "Z")]
    pub z: String,
    pub v_p: String,
    pub d: String,
    #[serde(rename = "n_T", default = "one")]
    pub n_t: f64,
    /// qubit frequency as f (Hz) ...
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_q: Option<String>,
    /// ... or as angular frequency (rad/s)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_q: Option<String>,
}

fn one() -> f64 {
    1.0
}

/// Dimensionless circuit scales: omega_TL/omega_g, omega_q/omega_TL and G.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalesSpec {
    pub omega_tl_over_omega_g: f64,
    pub omega_q_over_omega_tl: f64,
    #[serde(rename = "G")]
    pub g: f64,
}

/// Direct Drude-Lorentz parameters in units of omega_q.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSpec {
    pub lambda: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegimeSpec {
    pub margin: f64,
    pub comb_edge_slack: f64,
    /// in units of omega_q; omega_TL/100 when absent
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resonance_tol: Option<f64>,
}

impl Default for RegimeSpec {
    fn default() -> Self {
        let t = RegimeThresholds::default();
        Self { margin: t.margin, comb_edge_slack: t.comb_edge_slack, resonance_tol: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentKind {
    /// continuum for the long-line region, discrete modes otherwise
    #[default]
    Auto,
    Continuum,
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    #[default]
    Heom,
    Gkls,
    Tcl2,
    Fock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModesSpec {
    pub count: usize,
    /// mode indices kept (1-based); all `count` modes when absent
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keep: Option<Vec<usize>>,
    /// single-qubit line: exact transcendental roots instead of the
    /// large-ratio approximation
    pub exact_roots: bool,
}

impl Default for ModesSpec {
    fn default() -> Self {
        Self { count: 15, keep: None, exact_roots: true }
    }
}

/// Initial system state: a basis label ("10", "e"), a pure state vector or a
/// density matrix; complex numbers are [re, im] pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Label(String),
    Pure { pure: Vec<[f64; 2]> },
    Density { density: Vec<Vec<[f64; 2]>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSpec {
    /// omega_q t_end
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    #[default]
    Compressed,
    Matsubara,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeomSpec {
    pub depth: usize,
    pub series: SeriesKind,
    /// exponentials per channel for the compressed series
    pub exponents: usize,
    /// poles for the Matsubara series
    pub matsubara: usize,
    pub terminator: bool,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for HeomSpec {
    fn default() -> Self {
        Self {
            depth: 3,
            series: SeriesKind::Compressed,
            exponents: 3,
            matsubara: 3,
            terminator: false,
            rtol: 1e-8,
            atol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GklsSpec {
    pub lamb_shift: bool,
}

impl Default for GklsSpec {
    fn default() -> Self {
        Self { lamb_shift: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tcl2Spec {
    pub matsubara: usize,
}

impl Default for Tcl2Spec {
    fn default() -> Self {
        Self { matsubara: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FockSpec {
    pub cutoff: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excitation_cap: Option<usize>,
    pub rotating_wave: bool,
    pub dim_cap: usize,
}

impl Default for FockSpec {
    fn default() -> Self {
        Self { cutoff: 3, excitation_cap: None, rotating_wave: false, dim_cap: 20_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlpEngine {
    #[default]
    Heom,
    Gkls,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlpSpec {
    pub orthogonal_pure: usize,
    pub pauli_delta: usize,
    pub engine: BlpEngine,
}

impl Default for BlpSpec {
    fn default() -> Self {
        Self { orthogonal_pure: 150, pauli_delta: 50, engine: BlpEngine::Heom }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapSpec {
    /// gamma/omega_q, map columns
    pub gammas: Vec<f64>,
    /// rows
    pub thetas: Vec<f64>,
    /// add the resonance locus column (single-qubit maps by default)
    #[serde(skip_serializing_if = "Option::is_none")]
    pub locus: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSpec {
    pub threshold: f64,
    pub restarts: usize,
    /// fit window in units of 1/gamma
    pub window: f64,
}

impl Default for FitSpec {
    fn default() -> Self {
        Self { threshold: 1e-3, restarts: 10, window: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BathTableSpec {
    /// omega_TL / omega_g values
    pub ratios: Vec<f64>,
    pub points: usize,
    /// number of line modes in the discrete sums
    pub modes: usize,
}

impl Default for BathTableSpec {
    fn default() -> Self {
        Self { ratios: vec![10.0, 1.0, 0.1], points: 400, modes: 4000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RabiSpec {
    pub observable: String,
    /// oscillation amplitude below which no Rabi frequency is reported
    pub min_amplitude: f64,
    /// output samples over the run
    pub samples: usize,
}

impl Default for RabiSpec {
    fn default() -> Self {
        Self { observable: String::new(), min_amplitude: 1e-3, samples: 4096 }
    }
}

/// Target value for --check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs: Option<f64>,
    /// accept value/factor ..= value*factor
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<f64>,
}

impl Target {
    pub fn accepts(&self, x: f64) -> bool {
        let mut ok = x.is_finite();
        let mut any = false;
        if let Some(r) = self.rel {
            any = true;
            ok &= (x - self.value).abs() <= r * self.value.abs();
        }
        if let Some(a) = self.abs {
            any = true;
            ok &= (x - self.value).abs() <= a;
        }
        if let Some(f) = self.factor {
            any = true;
            ok &= x >= self.value / f && x <= self.value * f;
        }
        if !any {
            ok &= x == self.value;
        }
        ok
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpectSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regime: Option<RegimeKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blp: Option<Target>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rabi_omega: Option<Target>,
    /// final-time values of observables
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub final_values: BTreeMap<String, Target>,
    /// `compare`: largest pairwise final-time difference between solvers
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairwise_final: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<TopologySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circuit: Option<CircuitSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scales: Option<ScalesSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bath: Option<BathSpec>,
    /// k_B T / hbar omega_q ...
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// ... or a physical temperature (needs an SI qubit frequency)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<String>,
    #[serde(default)]
    pub regime: RegimeSpec,
    #[serde(default)]
    pub environment: EnvironmentKind,
    #[serde(default)]
    pub solver: SolverKind,
    #[serde(default)]
    pub modes: ModesSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<StateSpec>,
    /// add the flattened density matrix to trajectory CSVs
    #[serde(default)]
    pub write_rho: bool,
    #[serde(default)]
    pub time: TimeSpec,
    #[serde(default)]
    pub heom: HeomSpec,
    #[serde(default)]
    pub gkls: GklsSpec,
    #[serde(default)]
    pub tcl2: Tcl2Spec,
    #[serde(default)]
    pub fock: FockSpec,
    #[serde(default)]
    pub blp: BlpSpec,
    #[serde(default)]
    pub map: MapSpec,
    #[serde(default)]
    pub fit: FitSpec,
    #[serde(default)]
    pub bath_table: BathTableSpec,
    #[serde(default)]
    pub rabi: RabiSpec,
    #[serde(default)]
    pub observables: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub expect: ExpectSpec,
}

pub const DEFAULT_SEED: u64 = 0x5eed;

impl Scenario {
    /// Parse a scenario, or the scenario embedded in a run-metadata file.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
        let doc = match value.get("scenario") {
            Some(inner) if value.get("library_version").is_some() => inner.clone(),
            _ => value,
        };
        let s: Scenario = serde_json::from_value(doc).map_err(|e| CliError::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let present = [self.circuit.is_some(), self.scales.is_some(), self.bath.is_some()]
            .iter()
            .filter(|&&b| b)
            .count();
        if present != 1 {
            return Err(CliError::Config(
                "exactly one of `circuit`, `scales` (circuit parameters) or `bath` (direct bath parameters) is required"
                    .into(),
            ));
        }
        if self.topology.is_none() {
            return Err(CliError::Config("missing `topology` (two_qubit or single_qubit)".into()));
        }
        if self.theta.is_some() && self.temperature.is_some() {
            return Err(CliError::Config("give either `theta` or `temperature`, not both".into()));
        }
        if let Some(c) = &self.circuit {
            if c.f_q.is_some() == c.omega_q.is_some() {
                return Err(CliError::Config("circuit needs exactly one of `f_q` or `omega_q`".into()));
            }
        }
        if let Some(s) = &self.scales {
            for (n, v) in [
                ("omega_tl_over_omega_g", s.omega_tl_over_omega_g),
                ("omega_q_over_omega_tl", s.omega_q_over_omega_tl),
                ("G", s.g),
            ] {
                if !(v.is_finite() && v > 0.0) {
                    return Err(CliError::Config(format!("scales.{n} must be positive")));
                }
            }
        }
        if let Some(b) = &self.bath {
            if !(b.lambda > 0.0 && b.gamma > 0.0 && b.lambda.is_finite() && b.gamma.is_finite()) {
                return Err(CliError::Config("bath.lambda and bath.gamma must be positive".into()));
            }
        }
        if self.modes.count == 0 {
            return Err(CliError::Config("modes.count must be at least 1".into()));
        }
        if let Some(keep) = &self.modes.keep {
            if keep.is_empty() || keep.iter().any(|&n| n == 0 || n > self.modes.count) {
                return Err(CliError::Config(format!("modes.keep must list indices in 1..={}", self.modes.count)));
            }
        }
        if self.heom.depth == 0 || self.heom.exponents == 0 {
            return Err(CliError::Config("heom.depth and heom.exponents must be at least 1".into()));
        }
        if let Some(t) = self.time.t_end {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::Config("time.t_end must be positive".into()));
            }
        }
        if let Some(t) = self.time.dt {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::Config("time.dt must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn topology(&self) -> Topology {
        self.topology.expect("validated").into()
    }

    pub fn dim(&self) -> usize {
        self.topology().system_dimension()
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn thresholds(&self) -> RegimeThresholds {
        RegimeThresholds { margin: self.regime.margin, comb_edge_slack: self.regime.comb_edge_slack }
    }

    /// Circuit scales in SI units when the circuit was given element by element.
    pub fn si_scales(&self) -> Result<Option<DerivedScales>, CliError> {
        let Some(c) = &self.circuit else { return Ok(None) };
        let q = |s: &str, u: Unit| parse_quantity(s, u).map_err(CliError::Config);
        let omega_q = match (&c.f_q, &c.omega_q) {
            (Some(f), None) => 2.0 * PI * q(f, Unit::Hertz)?,
            (None, Some(w)) => q(w, Unit::RadPerSecond)?,
            _ => unreachable!("validated"),
        };
        let params = CircuitParams {
            shunt_capacitance: q(&c.c, Unit::Farad)?,
            coupling_capacitance: q(&c.c_g, Unit::Farad)?,
            impedance: q(&c.z, Unit::Ohm)?,
            phase_velocity: q(&c.v_p, Unit::MetrePerSecond)?,
            length: q(&c.d, Unit::Metre)?,
            transition_element: c.n_t,
            qubit_frequency: omega_q,
            topology: self.topology(),
        };
        derived_scales(&params).map(Some).map_err(CliError::from)
    }

    /// Circuit scales with omega_q = 1; `None` for direct-bath scenarios.
    pub fn scales(&self) -> Result<Option<DerivedScales>, CliError> {
        if let Some(si) = self.si_scales()? {
            return Ok(Some(si.normalized()));
        }
        match &self.scales {
            Some(s) => {
                let omega_tl = 1.0 / s.omega_q_over_omega_tl;
                let omega_g = omega_tl / s.omega_tl_over_omega_g;
                Ok(Some(DerivedScales::from_frequencies(1.0, omega_tl, omega_g, s.g)?))
            }
            None => Ok(None),
        }
    }

    pub fn require_scales(&self) -> Result<DerivedScales, CliError> {
        self.scales()?
            .ok_or_else(|| CliError::Config("this command needs circuit parameters (`circuit` or `scales`)".into()))
    }

    pub fn theta(&self) -> Result<f64, CliError> {
        if let Some(t) = self.theta {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(CliError::Config("theta must be non-negative".into()));
            }
            return Ok(t);
        }
        if let Some(text) = &self.temperature {
            let kelvin = parse_quantity(text, Unit::Kelvin).map_err(CliError::Config)?;
            let si = self.si_scales()?.ok_or_else(|| {
                CliError::Config("`temperature` needs an SI qubit frequency; give `theta` instead".into())
            })?;
            return Ok(K_B * kelvin / (HBAR * si.omega_q));
        }
        Err(CliError::Config("missing `theta` (or `temperature`)".into()))
    }

    /// Full mode set (omega_q = 1) and the retained subset.
    pub fn mode_sets(&self) -> Result<(ModeSet, ModeSet), CliError> {
        let scales = self.require_scales()?;
        let all = match self.topology() {
            Topology::TwoQubitSymmetric => circuit::mode_set_two_qubit(&scales, self.modes.count)?,
            Topology::SingleQubitShorted => {
                circuit::mode_set_single_qubit(&scales, self.modes.count, self.modes.exact_roots)?
            }
        };
        let kept = match &self.modes.keep {
            Some(idx) => all.subset(idx)?,
            None => all.clone(),
        };
        Ok((all, kept))
    }

    pub fn regime_label(&self) -> Result<(RegimeLabel, Vec<circuit::EtaEntry>), CliError> {
        let scales = self.require_scales()?;
        let (all, _) = self.mode_sets()?;
        let tol = self.regime.resonance_tol.unwrap_or_else(|| default_resonance_tol(scales.omega_tl));
        let eta = eta_profile(&all, 1.0, tol);
        let label = classify_regime(1.0, scales.omega_g, scales.omega_tl, self.thresholds(), Some(&eta));
        Ok((label, eta))
    }

    /// Continuum Drude-Lorentz bath (omega_q = 1).
    pub fn continuum_bath(&self) -> Result<DrudeLorentzBath, CliError> {
        let theta = self.theta()?;
        if let Some(b) = &self.bath {
            return Ok(DrudeLorentzBath::new(b.lambda, b.gamma, theta)?);
        }
        let scales = self.require_scales()?;
        Ok(bath_from_circuit(&scales, self.topology(), theta)?.bath)
    }

    pub fn environment(&self) -> Result<Environment, CliError> {
        if self.bath.is_some() {
            if self.environment == EnvironmentKind::Discrete {
                return Err(CliError::Config("a direct bath has no discrete modes; give circuit parameters".into()));
            }
            return Ok(Environment::Continuum(self.continuum_bath()?));
        }
        let continuum = match self.environment {
            EnvironmentKind::Continuum => true,
            EnvironmentKind::Discrete => false,
            EnvironmentKind::Auto => self.regime_label()?.0.kind == RegimeKind::LongLineContinuum,
        };
        if continuum {
            Ok(Environment::Continuum(self.continuum_bath()?))
        } else {
            Ok(Environment::Discrete(self.mode_sets()?.1))
        }
    }

    pub fn initial_state(&self) -> Result<CMatrix, CliError> {
        let d = self.dim();
        let default = if d == 4 { StateSpec::Label("10".into()) } else { StateSpec::Label("e".into()) };
        let spec = self.initial_state.clone().unwrap_or(default);
        let rho = match &spec {
            StateSpec::Label(label) => {
                let clean = label.trim().trim_start_matches('|').trim_end_matches('>').trim_end_matches('⟩');
                let name = format!("rho_{clean}_{clean}");
                let (i, _) = qline::trajectory::parse_observable(&name, d)
                    .map_err(|_| CliError::Config(format!("unknown basis label '{label}'")))?;
                linalg::basis_projector(d, i)
            }
            StateSpec::Pure { pure } => {
                if pure.len() != d {
                    return Err(CliError::Config(format!("pure state needs {d} amplitudes")));
                }
                let psi: Vec<_> = pure.iter().map(|z| linalg::c(z[0], z[1])).collect();
                let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return Err(CliError::Config("pure state is zero".into()));
                }
                let psi: Vec<_> = psi.iter().map(|z| z / norm).collect();
                linalg::projector(&psi)
            }
            StateSpec::Density { density } => {
                if density.len() != d || density.iter().any(|r| r.len() != d) {
                    return Err(CliError::Config(format!("density matrix must be {d}x{d}")));
                }
                CMatrix::from_fn(d, d, |i, j| linalg::c(density[i][j][0], density[i][j][1]))
            }
        };
        linalg::validate_density_matrix(&rho, 1e-8)
            .map_err(|e| CliError::Config(format!("initial state: {e}")))?;
        Ok(rho)
    }

    /// Tracked observables: the configured list or all populations.
    pub fn observables(&self) -> Vec<String> {
        if !self.observables.is_empty() {
            return self.observables.clone();
        }
        let d = self.dim();
        let bits = d.trailing_zeros() as usize;
        (0..d)
            .map(|i| {
                let l = format!("{i:0bits$b}");
                format!("rho_{l}_{l}")
            })
            .collect()
    }

    /// Parameter ranges typical of superconducting circuits; leaving them
    /// only warns.
    pub fn range_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Ok(Some(si)) = self.si_scales() {
            let tau_ps = si.tau_g * 1e12;
            if !(0.05..=5.0).contains(&tau_ps) {
                out.push(format!("tau_g = {tau_ps:.3} ps outside the typical range [0.05, 5] ps"));
            }
        }
        if let Ok(bath) = self.continuum_bath() {
            if !(2e-4..=0.3).contains(&bath.lambda) {
                out.push(format!("lambda/omega_q = {:.3e} outside the typical range [2e-4, 0.3]", bath.lambda));
            }
            if !(1.0..=100.0).contains(&bath.gamma) {
                out.push(format!("gamma/omega_q = {:.3e} outside the typical range [1, 100]", bath.gamma));
            }
        }
        if let Ok(theta) = self.theta() {
            // theta ~ 0.08 at 20 mK for a few-GHz qubit; flag a factor of two either way
            if !(0.04..=0.16).contains(&theta) {
                out.push(format!("theta = {theta:.3} far from the typical 0.08 (about 20 mK)"));
            }
        }
        out
    }
}

/// Bath seen by the qubits.
#[derive(Debug, Clone)]
pub enum Environment {
    Continuum(DrudeLorentzBath),
    Discrete(ModeSet),
}

/// Even and odd sectors of a two-qubit mode set, or the whole set for one qubit.
pub fn sectors(modes: &ModeSet) -> Vec<(Parity, ModeSet)> {
    match modes.topology {
        Topology::TwoQubitSymmetric => [Parity::Even, Parity::Odd]
            .into_iter()
            .filter_map(|p| modes.sector(p).ok().filter(|s| !s.is_empty()).map(|s| (p, s)))
            .collect(),
        Topology::SingleQubitShorted => vec![(Parity::None, modes.clone())],
    }
}
