//! Hierarchical equations of motion for a small system coupled linearly to
//! bosonic baths whose correlation functions are sums of exponentials.
//!
//! For each channel j with operator A_j and C_j(t) = sum_k c_jk exp(-nu_jk t),
//!
//! d rho_n/dt = -i [H, rho_n] - (sum n_jk nu_jk) rho_n
//!              - i sum_jk [A_j, rho_{n+e_jk}]
//!              - i sum_jk n_jk (c_jk A_j rho_{n-e_jk} - cbar_jk rho_{n-e_jk} A_j)
//!
//! where cbar_jk is the coefficient of exp(-nu_jk t) in C_j(t)^*. Each
//! channel's exponent set is first closed under complex conjugation.

use std::collections::HashMap;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomposition::CorrelationSeries;
use crate::error::{Error, Result};
use crate::linalg::{self, flat, CMatrix, I, ZERO};
use crate::ode::{self, IntegratorConfig, OdeError, OdeRhs};
use crate::special::binomial;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone)]
pub struct Channel {
    pub operator: CMatrix,
    pub series: CorrelationSeries,
}

#[derive(Debug, Clone)]
pub struct SystemModel {
    pub hamiltonian: CMatrix,
    pub channels: Vec<Channel>,
}

/// H_S = (omega_q / 2)(sigma_z x 1 + 1 x sigma_z).
pub fn two_qubit_hamiltonian(omega_q: f64) -> CMatrix {
    let id = linalg::identity(2);
    let z = linalg::sigma_z();
    (linalg::kron(&z, &id) + linalg::kron(&id, &z)) * linalg::c(omega_q / 2.0, 0.0)
}

pub fn single_qubit_hamiltonian(omega_q: f64) -> CMatrix {
    linalg::sigma_z() * linalg::c(omega_q / 2.0, 0.0)
}

/// Collective operators L_+ (even sector) and L_- (odd sector).
pub fn collective_operators() -> (CMatrix, CMatrix) {
    let id = linalg::identity(2);
    let y = linalg::sigma_y();
    let a = linalg::kron(&y, &id);
    let b = linalg::kron(&id, &y);
    (&a + &b, a - b)
}

impl SystemModel {
    pub fn new(hamiltonian: CMatrix, channels: Vec<Channel>) -> Result<Self> {
        let dim = hamiltonian.nrows();
        if !(dim == 2 || dim == 4) || hamiltonian.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: 4, got: dim });
        }
        if linalg::hermiticity_defect(&hamiltonian) > 1e-12 {
            return Err(Error::Domain("system Hamiltonian is not Hermitian".into()));
        }
        for ch in &channels {
            if ch.operator.nrows() != dim || ch.operator.ncols() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: ch.operator.nrows() });
            }
            if linalg::hermiticity_defect(&ch.operator) > 1e-12 {
                return Err(Error::Domain("coupling operator is not Hermitian".into()));
            }
        }
        Ok(Self { hamiltonian, channels })
    }

    /// Two qubits, L_+ coupled to `even` and L_- to `odd`.
    pub fn two_qubit(omega_q: f64, even: CorrelationSeries, odd: CorrelationSeries) -> Result<Self> {
        let (lp, lm) = collective_operators();
        Self::new(
            two_qubit_hamiltonian(omega_q),
            vec![Channel { operator: lp, series: even }, Channel { operator: lm, series: odd }],
        )
    }

    /// One qubit coupled through sigma_y.
    pub fn single_qubit(omega_q: f64, series: CorrelationSeries) -> Result<Self> {
        Self::new(
            single_qubit_hamiltonian(omega_q),
            vec![Channel { operator: linalg::sigma_y(), series }],
        )
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    /// Same system with every bath coefficient set to zero.
    pub fn uncoupled(&self) -> Self {
        Self {
            hamiltonian: self.hamiltonian.clone(),
            channels: self
                .channels
                .iter()
                .map(|c| Channel { operator: c.operator.clone(), series: c.series.scaled(0.0) })
                .collect(),
        }
    }
}

/// Number of ADOs with K exponents at depth L: binom(K + L, L).
pub fn hierarchy_size(k_total: u64, depth: u64) -> Result<u128> {
    binomial(k_total + depth, depth).ok_or_else(|| {
        Error::Domain(format!("hierarchy size binom({}, {depth}) overflows", k_total + depth))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HierarchyOptions {
    pub depth: usize,
    /// Adiabatic elimination of the first tier beyond `depth`.
    pub terminator: bool,
    /// Parallelize the right-hand side across ADOs above this hierarchy size.
    pub parallel_threshold: usize,
}

impl Default for HierarchyOptions {
    fn default() -> Self {
        Self { depth: 3, terminator: false, parallel_threshold: 128 }
    }
}

#[derive(Debug, Clone)]
struct Exponent {
    channel: usize,
    c: Complex64,
    cbar: Complex64,
    nu: Complex64,
}

#[derive(Debug, Clone)]
struct Node {
    tier: usize,
    damping: Complex64,
    /// (ADO index, channel) of each n + e_k
    plus: Vec<(usize, usize)>,
    /// (ADO index, channel, n_k c_k, n_k cbar_k) of each n - e_k
    minus: Vec<(usize, usize, Complex64, Complex64)>,
    /// terminator terms for exponents whose raised index exceeds the depth:
    /// (channel, (n_k + 1) c_k / w, (n_k + 1) cbar_k / w)
    term: Vec<(usize, Complex64, Complex64)>,
}

/// Immutable generator of the hierarchy dynamics.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    dim: usize,
    h: Vec<Complex64>,
    ops: Vec<Vec<Complex64>>,
    nodes: Vec<Node>,
    exponents: usize,
    pub options: HierarchyOptions,
}

/// Close a series under conjugation: returns (c, cbar, nu) per exponent.
fn conjugate_closure(series: &CorrelationSeries) -> Vec<(Complex64, Complex64, Complex64)> {
    let mut terms: Vec<(Complex64, Complex64)> =
        series.terms().iter().map(|t| (t.coefficient, t.rate)).collect();
    let close = |a: Complex64, b: Complex64| (a - b).norm() <= 1e-12 * a.norm().max(b.norm()).max(1e-300);
    let mut partner: Vec<Option<usize>> = vec![None; terms.len()];
    let n0 = terms.len();
    for k in 0..n0 {
        if partner[k].is_some() {
            continue;
        }
        let nu = terms[k].1;
        if nu.im == 0.0 {
            partner[k] = Some(k);
            continue;
        }
        let found = (0..terms.len()).find(|&q| q != k && partner.get(q).copied().flatten().is_none() && close(terms[q].1, nu.conj()));
        match found {
            Some(q) => {
                partner[k] = Some(q);
                partner[q] = Some(k);
            }
            None => {
                terms.push((ZERO, nu.conj()));
                let q = terms.len() - 1;
                partner.push(Some(k));
                partner[k] = Some(q);
            }
        }
    }
    terms
        .iter()
        .enumerate()
        .map(|(k, &(c, nu))| (c, terms[partner[k].expect("paired")].0.conj(), nu))
        .collect()
}

impl Hierarchy {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    pub fn exponent_count(&self) -> usize {
        self.exponents
    }

    pub fn state_len(&self) -> usize {
        self.nodes.len() * self.dim * self.dim
    }

    pub fn tier_of(&self, ado: usize) -> usize {
        self.nodes[ado].tier
    }

    fn ado_rhs(&self, index: usize, y: &[Complex64], out: &mut [Complex64]) {
        let d2 = self.dim * self.dim;
        let d = self.dim;
        let node = &self.nodes[index];
        let rho = &y[index * d2..(index + 1) * d2];
        for (o, r) in out.iter_mut().zip(rho) {
            *o = -node.damping * r;
        }
        flat::commutator_acc(out, &self.h, rho, d, -I);
        let channels = self.ops.len();
        // per channel: sum of plus-neighbours, and the c- and cbar-weighted
        // sums of minus-neighbours
        const STACK: usize = 3 * 16 * 4;
        let mut stack = [ZERO; STACK];
        let mut heap = Vec::new();
        let scratch: &mut [Complex64] = if 3 * d2 * channels <= STACK {
            &mut stack[..3 * d2 * channels]
        } else {
            heap.resize(3 * d2 * channels, ZERO);
            &mut heap
        };
        let (plus, rest) = scratch.split_at_mut(d2 * channels);
        let (left, right) = rest.split_at_mut(d2 * channels);
        for &(p, j) in &node.plus {
            for (s, v) in plus[j * d2..(j + 1) * d2].iter_mut().zip(&y[p * d2..(p + 1) * d2]) {
                *s += v;
            }
        }
        // adiabatic estimate of above-depth ADOs: -i (c A rho - cbar rho A) (n_k + 1) / w
        for &(j, cw, cbw) in &node.term {
            flat::gemm_left_acc(&mut plus[j * d2..(j + 1) * d2], &self.ops[j], rho, d, -I * cw);
            flat::gemm_right_acc(&mut plus[j * d2..(j + 1) * d2], rho, &self.ops[j], d, I * cbw);
        }
        for &(m, j, nc, ncb) in &node.minus {
            let lower = &y[m * d2..(m + 1) * d2];
            for ((l, r), v) in left[j * d2..(j + 1) * d2].iter_mut().zip(&mut right[j * d2..(j + 1) * d2]).zip(lower) {
                *l += nc * v;
                *r += ncb * v;
            }
        }
        let has_plus = !node.plus.is_empty() || !node.term.is_empty();
        let has_minus = !node.minus.is_empty();
        for j in 0..channels {
            let a = &self.ops[j];
            let sl = j * d2..(j + 1) * d2;
            if has_plus {
                flat::commutator_acc(out, a, &plus[sl.clone()], d, -I);
            }
            if has_minus {
                flat::gemm_left_acc(out, a, &left[sl.clone()], d, -I);
                flat::gemm_right_acc(out, &right[sl], a, d, I);
            }
        }
    }
}

impl OdeRhs for Hierarchy {
    fn len(&self) -> usize {
        self.state_len()
    }

    fn eval(&self, _t: f64, y: &[Complex64], dy: &mut [Complex64]) {
        let d2 = self.dim * self.dim;
        if self.nodes.len() >= self.options.parallel_threshold {
            dy.par_chunks_mut(d2).enumerate().for_each(|(i, out)| self.ado_rhs(i, y, out));
        } else {
            for (i, out) in dy.chunks_mut(d2).enumerate() {
                self.ado_rhs(i, y, out);
            }
        }
    }
}

/// Enumerate all multi-indices of `k` exponents with total <= depth, ordered
/// by tier and lexicographically within a tier.
fn enumerate_indices(k: usize, depth: usize) -> Vec<Vec<u8>> {
    let mut all = Vec::new();
    for tier in 0..=depth {
        let mut current = vec![0u8; k];
        fill(&mut all, &mut current, 0, tier);
    }
    all
}

fn fill(out: &mut Vec<Vec<u8>>, current: &mut Vec<u8>, pos: usize, remaining: usize) {
    if pos == current.len() {
        if remaining == 0 {
            out.push(current.clone());
        }
        return;
    }
    if pos + 1 == current.len() {
        current[pos] = remaining as u8;
        out.push(current.clone());
        current[pos] = 0;
        return;
    }
    for v in (0..=remaining).rev() {
        current[pos] = v as u8;
        fill(out, current, pos + 1, remaining - v);
    }
    current[pos] = 0;
}

pub fn build_hierarchy(system: &SystemModel, options: HierarchyOptions) -> Result<Hierarchy> {
    if options.depth == 0 && options.terminator {
        return Err(Error::Domain("terminator needs depth >= 1".into()));
    }
    let mut exps = Vec::new();
    for (j, ch) in system.channels.iter().enumerate() {
        if ch.series.is_empty() {
            return Err(Error::InvalidSeries(format!("channel {j} has no exponents")));
        }
        if ch.series.terms().iter().any(|t| t.rate.re < 0.0) {
            return Err(Error::InvalidSeries(format!("channel {j} has a growing exponent")));
        }
        for (c, cbar, nu) in conjugate_closure(&ch.series) {
            exps.push(Exponent { channel: j, c, cbar, nu });
        }
    }
    let k = exps.len();
    let count = hierarchy_size(k as u64, options.depth as u64)?;
    if count > 5_000_000 {
        return Err(Error::DimensionCap {
            dim: count.min(usize::MAX as u128) as usize,
            cap: 5_000_000,
            suggestion: "reduce the depth or the number of exponents".into(),
        });
    }
    if options.depth > u8::MAX as usize {
        return Err(Error::Domain("depth too large".into()));
    }
    let indices = enumerate_indices(k, options.depth);
    debug_assert_eq!(indices.len() as u128, count);
    let lookup: HashMap<&[u8], usize> = indices.iter().enumerate().map(|(i, v)| (v.as_slice(), i)).collect();
    let mut nodes = Vec::with_capacity(indices.len());
    let mut scratch = vec![0u8; k];
    for idx in &indices {
        let tier: usize = idx.iter().map(|&v| v as usize).sum();
        let damping: Complex64 = idx.iter().zip(&exps).map(|(&n, e)| e.nu * n as f64).sum();
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        let mut term = Vec::new();
        for (q, e) in exps.iter().enumerate() {
            scratch.copy_from_slice(idx);
            if tier < options.depth {
                scratch[q] += 1;
                plus.push((lookup[scratch.as_slice()], e.channel));
                scratch[q] -= 1;
            } else if options.terminator && e.nu.re > 0.0 {
                let w = damping + e.nu;
                let f = (idx[q] as f64 + 1.0) / w;
                term.push((e.channel, e.c * f, e.cbar * f));
            }
            if idx[q] > 0 {
                scratch[q] -= 1;
                let n = idx[q] as f64;
                minus.push((lookup[scratch.as_slice()], e.channel, e.c * n, e.cbar * n));
            }
        }
        nodes.push(Node { tier, damping, plus, minus, term });
    }
    Ok(Hierarchy {
        dim: system.dim(),
        h: linalg::flatten(&system.hamiltonian),
        ops: system.channels.iter().map(|c| linalg::flatten(&c.operator)).collect(),
        nodes,
        exponents: k,
        options,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub ado_count: usize,
    pub exponents: usize,
    pub depth: usize,
    pub rtol: f64,
    pub atol: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub wall_seconds: f64,
}

pub(crate) fn map_ode_error(err: OdeError, tier_of: impl Fn(usize) -> usize) -> Error {
    match err {
        OdeError::StepCollapse { t, h, worst_component } => Error::Stiffness { t, h, tier: tier_of(worst_component) },
        OdeError::MaxSteps { t } => Error::Integration(format!("step budget exhausted at t = {t:.6e}")),
        OdeError::NonFinite { t } => Error::Integration(format!("non-finite state at t = {t:.6e}")),
    }
}

/// Propagate rho0 (all auxiliary operators zero) on the uniform grid
/// 0, dt_out, ..., t_end.
pub fn evolve(
    hierarchy: &Hierarchy,
    rho0: &CMatrix,
    t_end: f64,
    dt_out: f64,
    cfg: &IntegratorConfig,
) -> Result<(Trajectory, RunReport)> {
    let d = hierarchy.dim;
    if rho0.nrows() != d || rho0.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: rho0.nrows() });
    }
    linalg::validate_density_matrix(rho0, 1e-10)?;
    let (times, raw, report) = propagate_raw(hierarchy, rho0, t_end, dt_out, cfg)?;
    let traj = Trajectory::from_states("heom", times, raw);
    // negative eigenvalues from hierarchy truncation are reported in the
    // diagnostics, not treated as failures
    traj.check(1e-8, f64::INFINITY)?;
    Ok((traj, report))
}

/// Propagate an arbitrary (not necessarily physical) initial system
/// operator and return the raw tier-0 matrices; used to build dynamical maps.
pub fn propagate_raw(
    hierarchy: &Hierarchy,
    x0: &CMatrix,
    t_end: f64,
    dt_out: f64,
    cfg: &IntegratorConfig,
) -> Result<(Vec<f64>, Vec<CMatrix>, RunReport)> {
    if !(t_end > 0.0 && dt_out > 0.0) {
        return Err(Error::Domain("t_end and dt_out must be positive".into()));
    }
    let d = hierarchy.dim;
    let d2 = d * d;
    let start = Instant::now();
    let times = ode::uniform_grid(t_end, dt_out);
    let mut y = vec![ZERO; hierarchy.state_len()];
    y[..d2].copy_from_slice(&linalg::flatten(x0));
    let mut raw = Vec::with_capacity(times.len());
    let stats = ode::integrate(hierarchy, y, &times, cfg, |_, _, y| raw.push(linalg::unflatten(&y[..d2], d)))
        .map_err(|e| map_ode_error(e, |c| hierarchy.tier_of(c / d2)))?;
    let report = RunReport {
        ado_count: hierarchy.size(),
        exponents: hierarchy.exponent_count(),
        depth: hierarchy.options.depth,
        rtol: cfg.rtol,
        atol: cfg.atol,
        accepted_steps: stats.accepted,
        rejected_steps: stats.rejected,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((times, raw, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// (depth, per-channel K) of each configuration
    pub configs: Vec<(usize, usize)>,
    /// max over time and tracked observables of |a - b| for every pair
    pub deviation: Vec<Vec<f64>>,
    /// successive refinements differ by less than the tolerance
    pub converged: bool,
    pub tolerance: f64,
}

/// Run every (L, K) combination and compare the tracked observables.
/// `make_system(K)` builds the model with K exponents per channel.
pub fn convergence_scan<F>(
    make_system: F,
    rho0: &CMatrix,
    t_end: f64,
    dt_out: f64,
    depths: &[usize],
    ks: &[usize],
    observables: &[&str],
    cfg: &IntegratorConfig,
) -> Result<ConvergenceReport>
where
    F: Fn(usize) -> Result<SystemModel>,
{
    if depths.is_empty() || ks.is_empty() {
        return Err(Error::Domain("convergence scan needs non-empty L and K lists".into()));
    }
    let mut configs = Vec::new();
    let mut series: Vec<Vec<Vec<f64>>> = Vec::new();
    for &k in ks {
        let system = make_system(k)?;
        for &l in depths {
            let h = build_hierarchy(&system, HierarchyOptions { depth: l, ..Default::default() })?;
            let (traj, _) = evolve(&h, rho0, t_end, dt_out, cfg)?;
            let obs = observables.iter().map(|o| traj.observable(o)).collect::<Result<Vec<_>>>()?;
            configs.push((l, k));
            series.push(obs);
        }
    }
    let n = configs.len();
    let mut deviation = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in 0..n {
            let mut worst: f64 = 0.0;
            for (oa, ob) in series[a].iter().zip(&series[b]) {
                for (x, y) in oa.iter().zip(ob) {
                    worst = worst.max((x - y).abs());
                }
            }
            deviation[a][b] = worst;
        }
    }
    let tolerance = 1e-3;
    let converged = n == 1 || (1..n).all(|i| deviation[i - 1][i] < tolerance) && deviation[n - 2][n - 1] < tolerance;
    Ok(ConvergenceReport { configs, deviation, converged, tolerance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::{ExpTerm, SeriesOrigin};
    use crate::linalg::c;

    fn one_term(c0: Complex64, nu: Complex64) -> CorrelationSeries {
        CorrelationSeries::new(vec![ExpTerm { coefficient: c0, rate: nu }], SeriesOrigin::Compressed, None).unwrap()
    }

    #[test]
    fn sizes() {
        assert_eq!(hierarchy_size(3, 3).unwrap(), 20);
        assert_eq!(hierarchy_size(7, 0).unwrap(), 1);
        assert_eq!(hierarchy_size(6, 3).unwrap(), 84);
        for (k, l) in [(3, 3), (6, 3), (4, 2), (1, 5)] {
            assert_eq!(enumerate_indices(k, l).len() as u128, hierarchy_size(k as u64, l as u64).unwrap());
        }
    }

    #[test]
    fn conjugate_pairs_are_added() {
        let s = one_term(c(1.0, 0.0), c(0.0, 2.0));
        let closed = conjugate_closure(&s);
        assert_eq!(closed.len(), 2);
        assert_eq!(closed[0].1, ZERO);
        assert_eq!(closed[1].1, c(1.0, 0.0));
        let real = conjugate_closure(&one_term(c(0.3, -0.2), c(1.0, 0.0)));
        assert_eq!(real[0].1, c(0.3, 0.2));
    }

    /// One real exponent, L = 1: two ADOs. Compare with the same 8-dimensional
    /// linear system written out by hand and integrated densely.
    #[test]
    fn two_ado_instance_matches_hand_written_system() {
        let cc = c(0.05, -0.02);
        let nu = c(0.7, 0.0);
        let sys = SystemModel::single_qubit(1.0, one_term(cc, nu)).unwrap();
        let h = build_hierarchy(&sys, HierarchyOptions { depth: 1, ..Default::default() }).unwrap();
        assert_eq!(h.size(), 2);
        let rho0 = linalg::basis_projector(2, 1);
        let (traj, _) = evolve(&h, &rho0, 5.0, 0.5, &IntegratorConfig::default()).unwrap();

        let hs = single_qubit_hamiltonian(1.0);
        let a = linalg::sigma_y();
        // vec(X) -> vec of [rho0; rho1]; generator built from explicit superoperators
        let d = 2;
        let apply = |x: &[CMatrix; 2]| -> [CMatrix; 2] {
            let r0 = -(&hs * &x[0] - &x[0] * &hs) * I - (&a * &x[1] - &x[1] * &a) * I;
            let r1 = -(&hs * &x[1] - &x[1] * &hs) * I - &x[1] * nu
                - (&a * &x[0] * cc - &x[0] * &a * cc.conj()) * I;
            [r0, r1]
        };
        let mut gen = nalgebra::DMatrix::<Complex64>::zeros(8, 8);
        for col in 0..8 {
            let mut basis = [CMatrix::zeros(d, d), CMatrix::zeros(d, d)];
            basis[col / 4][((col % 4) / 2, col % 2)] = linalg::ONE;
            let out = apply(&basis);
            for row in 0..8 {
                gen[(row, col)] = out[row / 4][((row % 4) / 2, row % 2)];
            }
        }
        // dense exponential by scaling and squaring of a Taylor series
        let expm = |m: &nalgebra::DMatrix<Complex64>| {
            let s = 10;
            let a = m / c(2f64.powi(s), 0.0);
            let mut term = nalgebra::DMatrix::<Complex64>::identity(8, 8);
            let mut sum = term.clone();
            for k in 1..30 {
                term = &term * &a / c(k as f64, 0.0);
                sum += &term;
            }
            let mut r = sum;
            for _ in 0..s {
                r = &r * &r;
            }
            r
        };
        for (i, t) in traj.times.iter().enumerate() {
            let mut v = nalgebra::DVector::<Complex64>::zeros(8);
            v[3] = linalg::ONE;
            let out = expm(&(&gen * c(*t, 0.0))) * v;
            for p in 0..2 {
                for q in 0..2 {
                    assert!((out[2 * p + q] - traj.states[i][(p, q)]).norm() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn zero_coupling_is_unitary() {
        let s = one_term(c(0.0, 0.0), c(1.0, 0.0));
        let sys = SystemModel::two_qubit(1.0, s.clone(), s).unwrap();
        let h = build_hierarchy(&sys, HierarchyOptions::default()).unwrap();
        let psi = [c(0.5, 0.0), c(0.5, 0.1), c(-0.3, 0.2), c(0.0, 0.4)];
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let psi: Vec<Complex64> = psi.iter().map(|z| z / norm).collect();
        let rho0 = linalg::projector(&psi);
        let cfg = IntegratorConfig { rtol: 1e-11, atol: 1e-13, ..Default::default() };
        let (traj, _) = evolve(&h, &rho0, 10.0, 1.0, &cfg).unwrap();
        let hs = two_qubit_hamiltonian(1.0);
        for (t, rho) in traj.times.iter().zip(&traj.states) {
            let u = linalg::unitary_propagator(&hs, *t);
            let exact = &u * &rho0 * u.adjoint();
            assert!((rho - &exact).norm() < 1e-9, "t={t} err={}", (rho - &exact).norm());
        }
        let p = traj.observable("rho_10_10").unwrap();
        let (t2, _) = evolve(&h, &linalg::basis_projector(4, 2), 10.0, 1.0, &IntegratorConfig::default()).unwrap();
        assert!(t2.observable("rho_10_10").unwrap().iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert_eq!(p.len(), 11);
    }

    #[test]
    fn split_exponent_leaves_dynamics_unchanged() {
        let s = one_term(c(0.05, -0.03), c(1.5, 0.0));
        let sys = SystemModel::single_qubit(1.0, s.clone()).unwrap();
        let split = SystemModel::single_qubit(1.0, s.split_term(0)).unwrap();
        let rho0 = linalg::basis_projector(2, 1);
        let cfg = IntegratorConfig { rtol: 1e-11, atol: 1e-13, ..Default::default() };
        let opts = HierarchyOptions { depth: 3, ..Default::default() };
        let (a, _) = evolve(&build_hierarchy(&sys, opts).unwrap(), &rho0, 20.0, 1.0, &cfg).unwrap();
        let (b, _) = evolve(&build_hierarchy(&split, opts).unwrap(), &rho0, 20.0, 1.0, &cfg).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            assert!((x - y).norm() < 1e-8);
        }
    }

    #[test]
    fn growing_exponents_rejected_by_series() {
        let bad = CorrelationSeries::new(
            vec![ExpTerm { coefficient: c(1.0, 0.0), rate: c(-1.0, 0.0) }],
            SeriesOrigin::Compressed,
            None,
        );
        assert!(bad.is_err());
    }
}
