//! Exact unitary dynamics of the qubits plus a few line modes in a truncated
//! Fock space:
//!
//! H = H_S + sum_n w_n b_n^dagger b_n + sum_n g_n A_n (b_n + b_n^dagger)
//!
//! with A_n = L_+ (even), L_- (odd) or sigma_y (single qubit). A thermal
//! initial bath is an ensemble of Fock product states with Boltzmann weights.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eigenoperators;
use crate::circuit::{ModeSet, Parity, Topology};
use crate::error::{Error, Result};
use crate::heom::collective_operators;
use crate::linalg::{self, c, CMatrix, ZERO};
use crate::ode::uniform_grid;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BathInit {
    Vacuum,
    /// theta in the units of the mode frequencies
    Thermal { theta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FockModelConfig {
    /// Highest occupation kept per mode (one entry per mode, or a single
    /// entry applied to all).
    pub cutoffs: Vec<usize>,
    /// Optional cap on the total number of bath quanta.
    pub excitation_cap: Option<usize>,
    pub init: BathInit,
    pub dim_cap: usize,
    /// Keep only the energy-conserving half of the coupling.
    pub rotating_wave: bool,
    /// Thermal ensemble members below this weight are dropped.
    pub weight_floor: f64,
    /// Dense diagonalization up to this dimension, Lanczos stepping above.
    pub dense_limit: usize,
}

impl Default for FockModelConfig {
    fn default() -> Self {
        Self {
            cutoffs: vec![3],
            excitation_cap: None,
            init: BathInit::Vacuum,
            dim_cap: 20_000,
            rotating_wave: false,
            weight_floor: 1e-6,
            dense_limit: 2500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FockReport {
    pub dim: usize,
    pub ensemble_size: usize,
    /// Thermal weight discarded by the floor and the truncation.
    pub dropped_weight: f64,
    /// max over members and outputs of |<H>(t) - <H>(0)|
    pub max_energy_drift: f64,
    /// max over members and outputs of |<N>(t) - <N>(0)| (rotating wave only)
    pub max_number_drift: f64,
    pub dense: bool,
}

/// Sparse Hermitian matrix in coordinate form (both triangles stored).
#[derive(Debug, Clone)]
struct Sparse {
    n: usize,
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl Sparse {
    fn new(n: usize) -> Self {
        Self { n, rows: vec![Vec::new(); n] }
    }

    fn add(&mut self, i: usize, j: usize, v: Complex64) {
        if v != ZERO {
            self.rows[i].push((j, v));
        }
    }

    fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (i, row) in self.rows.iter().enumerate() {
            y[i] = row.iter().map(|&(j, v)| v * x[j]).sum();
        }
    }

    fn dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.n, self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j)] += v;
            }
        }
        m
    }

    fn expectation(&self, x: &[Complex64]) -> f64 {
        let mut y = vec![ZERO; self.n];
        self.matvec(x, &mut y);
        x.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum()
    }
}

struct FockSpace {
    configs: Vec<Vec<usize>>,
    lookup: HashMap<Vec<usize>, usize>,
}

fn enumerate_configs(cutoffs: &[usize], cap: Option<usize>) -> FockSpace {
    let mut configs = Vec::new();
    let mut cur = vec![0usize; cutoffs.len()];
    fn rec(k: usize, cutoffs: &[usize], cap: Option<usize>, used: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == cutoffs.len() {
            out.push(cur.clone());
            return;
        }
        let limit = match cap {
            Some(c) => cutoffs[k].min(c - used),
            None => cutoffs[k],
        };
        for n in 0..=limit {
            cur[k] = n;
            rec(k + 1, cutoffs, cap, used + n, cur, out);
        }
        cur[k] = 0;
    }
    rec(0, cutoffs, cap, 0, &mut cur, &mut configs);
    let lookup = configs.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
    FockSpace { configs, lookup }
}

fn mode_operator(topology: Topology, parity: Parity) -> Result<CMatrix> {
    match (topology, parity) {
        (Topology::TwoQubitSymmetric, Parity::Even) => Ok(collective_operators().0),
        (Topology::TwoQubitSymmetric, Parity::Odd) => Ok(collective_operators().1),
        (Topology::SingleQubitShorted, _) => Ok(linalg::sigma_y()),
        _ => Err(Error::Domain("two-qubit mode without parity".into())),
    }
}

fn suggest_cutoffs(cutoffs: &[usize], cap: Option<usize>, dim_cap: usize, d: usize) -> String {
    let m = cutoffs.len();
    // largest uniform cutoff that fits
    let mut best = None;
    for n in (1..=cutoffs.iter().copied().max().unwrap_or(1)).rev() {
        let size = enumerate_count(&vec![n; m], cap) * d;
        if size <= dim_cap {
            best = Some(n);
            break;
        }
    }
    match best {
        Some(n) => format!("try a uniform cutoff of {n} or an excitation cap"),
        None => "reduce the number of modes or set an excitation cap".to_string(),
    }
}

fn enumerate_count(cutoffs: &[usize], cap: Option<usize>) -> usize {
    match cap {
        None => cutoffs.iter().fold(1usize, |a, &c| a.saturating_mul(c + 1)),
        Some(cap) => {
            // count vectors with n_k <= cutoff_k and sum <= cap
            let mut ways = vec![0usize; cap + 1];
            ways[0] = 1;
            for &c in cutoffs {
                let mut next = vec![0usize; cap + 1];
                for (s, &w) in ways.iter().enumerate() {
                    if w == 0 {
                        continue;
                    }
                    for n in 0..=c.min(cap - s) {
                        next[s + n] = next[s + n].saturating_add(w);
                    }
                }
                ways = next;
            }
            ways.iter().fold(0usize, |a, &b| a.saturating_add(b))
        }
    }
}

/// Ensemble of initial bath configurations with their weights.
fn initial_ensemble(
    modes: &ModeSet,
    space: &FockSpace,
    init: BathInit,
    floor: f64,
) -> (Vec<(usize, f64)>, f64) {
    match init {
        BathInit::Vacuum => (vec![(0, 1.0)], 0.0),
        BathInit::Thermal { theta } if theta <= 0.0 => (vec![(0, 1.0)], 0.0),
        BathInit::Thermal { theta } => {
            let xs: Vec<f64> = modes.modes().iter().map(|m| (-m.omega / theta).exp()).collect();
            let mut kept = Vec::new();
            let mut total = 0.0;
            for (i, cfg) in space.configs.iter().enumerate() {
                let w: f64 = cfg.iter().zip(&xs).map(|(&n, &x)| (1.0 - x) * x.powi(n as i32)).product();
                if w >= floor {
                    kept.push((i, w));
                    total += w;
                }
            }
            for k in kept.iter_mut() {
                k.1 /= total;
            }
            (kept, 1.0 - total)
        }
    }
}

fn lanczos_step(h: &Sparse, psi: &[Complex64], dt: f64, m_max: usize) -> (Vec<Complex64>, f64) {
    let n = psi.len();
    let norm0: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut v: Vec<Vec<Complex64>> = vec![psi.iter().map(|z| z / norm0).collect()];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![ZERO; n];
    for j in 0..m_max {
        h.matvec(&v[j], &mut w);
        let a: f64 = v[j].iter().zip(&w).map(|(x, y)| (x.conj() * y).re).sum();
        for i in 0..n {
            w[i] -= v[j][i] * a;
            if j > 0 {
                w[i] -= v[j - 1][i] * beta[j - 1];
            }
        }
        // full reorthogonalization keeps the small basis well conditioned
        for vk in &v {
            let p: Complex64 = vk.iter().zip(&w).map(|(x, y)| x.conj() * y).sum();
            for i in 0..n {
                w[i] -= vk[i] * p;
            }
        }
        alpha.push(a);
        let b: f64 = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if b < 1e-14 || j + 1 == m_max {
            beta.push(b);
            break;
        }
        beta.push(b);
        v.push(w.iter().map(|z| z / b).collect());
    }
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = t.symmetric_eigen();
    let mut coef = vec![ZERO; m];
    for k in 0..m {
        let phase = Complex64::from_polar(1.0, -eig.eigenvalues[k] * dt) * eig.eigenvectors[(0, k)];
        for (i, cf) in coef.iter_mut().enumerate() {
            *cf += eig.eigenvectors[(i, k)] * phase;
        }
    }
    let err = beta[m - 1] * coef[m - 1].norm() * dt.abs();
    let mut out = vec![ZERO; n];
    for (i, vi) in v.iter().enumerate().take(m) {
        for (o, x) in out.iter_mut().zip(vi) {
            *o += x * coef[i] * norm0;
        }
    }
    (out, err)
}

fn reduced(psi: &[Complex64], d: usize, nb: usize, weight: f64, acc: &mut CMatrix) {
    for i in 0..d {
        for j in 0..d {
            let mut s = ZERO;
            for b in 0..nb {
                s += psi[i * nb + b] * psi[j * nb + b].conj();
            }
            acc[(i, j)] += s * weight;
        }
    }
}

/// Evolve `rho0` (system) with the bath modes of `modes` (frequencies and
/// couplings in the units of `hamiltonian`).
pub fn exact_fock_oracle(
    hamiltonian: &CMatrix,
    cfg: &FockModelConfig,
    modes: &ModeSet,
    rho0: &CMatrix,
    t_end: f64,
    dt_out: f64,
) -> Result<(Trajectory, FockReport)> {
    let d = hamiltonian.nrows();
    if rho0.nrows() != d {
        return Err(Error::DimensionMismatch { expected: d, got: rho0.nrows() });
    }
    linalg::validate_density_matrix(rho0, 1e-10)?;
    if !(t_end > 0.0 && dt_out > 0.0) {
        return Err(Error::Domain("t_end and dt_out must be positive".into()));
    }
    let m = modes.len();
    let cutoffs: Vec<usize> = match cfg.cutoffs.len() {
        1 => vec![cfg.cutoffs[0]; m],
        k if k == m => cfg.cutoffs.clone(),
        k => return Err(Error::DimensionMismatch { expected: m, got: k }),
    };
    if cutoffs.iter().any(|&c| c < 1) {
        return Err(Error::Domain("Fock cutoffs must be at least 1".into()));
    }
    let nb_count = enumerate_count(&cutoffs, cfg.excitation_cap);
    let dim = nb_count.saturating_mul(d);
    if dim > cfg.dim_cap {
        return Err(Error::DimensionCap {
            dim,
            cap: cfg.dim_cap,
            suggestion: suggest_cutoffs(&cutoffs, cfg.excitation_cap, cfg.dim_cap, d),
        });
    }
    let space = enumerate_configs(&cutoffs, cfg.excitation_cap);
    let nb = space.configs.len();

    // coupling pieces per mode: (raising part with b, lowering part with b^dagger)
    let mut ops = Vec::with_capacity(m);
    for mode in modes.modes() {
        let a = mode_operator(modes.topology, mode.parity)?;
        if cfg.rotating_wave {
            let parts = eigenoperators(hamiltonian, &a, 1e-9);
            let mut lower = CMatrix::zeros(d, d);
            for (w, p) in parts {
                if w > 0.0 {
                    lower += p;
                }
            }
            let raise = lower.adjoint();
            ops.push((raise, lower));
        } else {
            ops.push((a.clone(), a));
        }
    }

    let mut h = Sparse::new(dim);
    let mut number = Sparse::new(dim);
    for (b, conf) in space.configs.iter().enumerate() {
        let e_bath: f64 = conf.iter().zip(modes.modes()).map(|(&n, md)| n as f64 * md.omega).sum();
        for i in 0..d {
            for j in 0..d {
                let mut v = hamiltonian[(i, j)];
                if i == j {
                    v += e_bath;
                }
                h.add(i * nb + b, j * nb + b, v);
            }
            let sys_exc = i.count_ones() as f64;
            number.add(i * nb + b, i * nb + b, c(conf.iter().sum::<usize>() as f64 + sys_exc, 0.0));
        }
        for (k, mode) in modes.modes().iter().enumerate() {
            let mut up = conf.clone();
            up[k] += 1;
            let Some(&b2) = space.lookup.get(&up) else { continue };
            let amp = mode.coupling * ((conf[k] + 1) as f64).sqrt();
            // <b2| b^dagger |b> = amp: the operator paired with b^dagger is the
            // lowering part; its adjoint (with b) fills the transposed block
            let (_, lower) = &ops[k];
            for i in 0..d {
                for j in 0..d {
                    let v = lower[(i, j)] * amp;
                    h.add(i * nb + b2, j * nb + b, v);
                    h.add(j * nb + b, i * nb + b2, v.conj());
                }
            }
        }
    }
    let (ensemble, dropped) = initial_ensemble(modes, &space, cfg.init, cfg.weight_floor);
    let rho_eig = linalg::hermitian_part(rho0).symmetric_eigen();
    let mut members: Vec<(Vec<Complex64>, f64)> = Vec::new();
    for k in 0..d {
        let p = rho_eig.eigenvalues[k];
        if p < 1e-14 {
            continue;
        }
        let phi = rho_eig.eigenvectors.column(k);
        for &(b, w) in &ensemble {
            let mut psi = vec![ZERO; dim];
            for i in 0..d {
                psi[i * nb + b] = phi[i];
            }
            members.push((psi, p * w));
        }
    }

    let times = uniform_grid(t_end, dt_out);
    let dense = dim <= cfg.dense_limit;
    let eig = if dense { Some(linalg::hermitian_part(&h.dense()).symmetric_eigen()) } else { None };
    let track_number = cfg.rotating_wave;

    let results: Vec<Result<(Vec<CMatrix>, f64, f64)>> = members
        .par_iter()
        .map(|(psi0, weight)| {
            let e0 = h.expectation(psi0);
            let n0 = if track_number { number.expectation(psi0) } else { 0.0 };
            let mut drift: f64 = 0.0;
            let mut ndrift: f64 = 0.0;
            let mut out = Vec::with_capacity(times.len());
            let record = |psi: &[Complex64], drift: &mut f64, ndrift: &mut f64| {
                let mut acc = CMatrix::zeros(d, d);
                reduced(psi, d, nb, *weight, &mut acc);
                *drift = drift.max((h.expectation(psi) - e0).abs());
                if track_number {
                    *ndrift = ndrift.max((number.expectation(psi) - n0).abs());
                }
                acc
            };
            if let Some(eig) = &eig {
                let v0 = eig.eigenvectors.adjoint() * DVector::from_column_slice(psi0);
                for &t in &times {
                    let phased = DVector::from_fn(dim, |k, _| v0[k] * Complex64::from_polar(1.0, -eig.eigenvalues[k] * t));
                    let psi = &eig.eigenvectors * phased;
                    out.push(record(psi.as_slice(), &mut drift, &mut ndrift));
                }
            } else {
                let mut psi = psi0.clone();
                out.push(record(&psi, &mut drift, &mut ndrift));
                let mut h_step = dt_out;
                for w in times.windows(2) {
                    let mut t = w[0];
                    while t < w[1] - 1e-14 * w[1].max(1.0) {
                        let step = h_step.min(w[1] - t);
                        let (next, err) = lanczos_step(&h, &psi, step, 40);
                        if err > 1e-10 && step > 1e-8 {
                            h_step = step / 2.0;
                            continue;
                        }
                        psi = next;
                        t += step;
                        if err < 1e-13 {
                            h_step = (h_step * 1.5).min(dt_out);
                        }
                    }
                    out.push(record(&psi, &mut drift, &mut ndrift));
                }
            }
            Ok((out, drift, ndrift))
        })
        .collect();

    let mut states = vec![CMatrix::zeros(d, d); times.len()];
    let mut max_drift: f64 = 0.0;
    let mut max_ndrift: f64 = 0.0;
    for r in results {
        let (traj, drift, ndrift) = r?;
        for (acc, s) in states.iter_mut().zip(traj) {
            *acc += s;
        }
        max_drift = max_drift.max(drift);
        max_ndrift = max_ndrift.max(ndrift);
    }
    let traj = Trajectory::from_states("fock", times, states);
    let report = FockReport {
        dim,
        ensemble_size: members.len(),
        dropped_weight: dropped,
        max_energy_drift: max_drift,
        max_number_drift: max_ndrift,
        dense,
    };
    Ok((traj, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Mode;
    use crate::heom::{single_qubit_hamiltonian, two_qubit_hamiltonian};

    fn one_mode(topology: Topology, parity: Parity, omega: f64, g: f64) -> ModeSet {
        ModeSet::new(topology, vec![Mode { index: 1, omega, coupling: g, parity, boundary_amplitude: 1.0 }]).unwrap()
    }

    #[test]
    fn config_counts() {
        assert_eq!(enumerate_count(&[2, 2, 2], None), 27);
        assert_eq!(enumerate_count(&[2, 2, 2], Some(2)), 10);
        assert_eq!(enumerate_configs(&[3, 1], Some(2)).configs.len(), 5);
    }

    #[test]
    fn zero_coupling_freezes_populations() {
        let modes = one_mode(Topology::TwoQubitSymmetric, Parity::Even, 1.0, 0.0);
        let rho0 = linalg::basis_projector(4, 2);
        let (traj, _) =
            exact_fock_oracle(&two_qubit_hamiltonian(1.0), &FockModelConfig::default(), &modes, &rho0, 20.0, 1.0).unwrap();
        assert!(traj.observable("rho_10_10").unwrap().iter().all(|p| (p - 1.0).abs() < 1e-12));
    }

    #[test]
    fn jaynes_cummings_vacuum_rabi() {
        // single qubit, resonant mode, rotating wave: P_e = cos^2(g t)
        let g = 0.01;
        let modes = one_mode(Topology::SingleQubitShorted, Parity::None, 1.0, g);
        let cfg = FockModelConfig { rotating_wave: true, ..Default::default() };
        let rho0 = linalg::basis_projector(2, 1);
        let (traj, rep) = exact_fock_oracle(&single_qubit_hamiltonian(1.0), &cfg, &modes, &rho0, 300.0, 5.0).unwrap();
        for (t, p) in traj.times.iter().zip(traj.observable("rho_e_e").unwrap()) {
            assert!((p - (g * t).cos().powi(2)).abs() < 1e-10);
        }
        assert!(rep.max_number_drift < 1e-10 && rep.max_energy_drift < 1e-10);
    }

    #[test]
    fn lanczos_matches_dense() {
        let modes = one_mode(Topology::TwoQubitSymmetric, Parity::Even, 1.0, 0.05);
        let rho0 = linalg::basis_projector(4, 2);
        let base = FockModelConfig { cutoffs: vec![4], ..Default::default() };
        let (a, _) = exact_fock_oracle(&two_qubit_hamiltonian(1.0), &base, &modes, &rho0, 30.0, 1.0).unwrap();
        let lz = FockModelConfig { dense_limit: 0, ..base };
        let (b, rep) = exact_fock_oracle(&two_qubit_hamiltonian(1.0), &lz, &modes, &rho0, 30.0, 1.0).unwrap();
        assert!(!rep.dense);
        for (x, y) in a.states.iter().zip(&b.states) {
            assert!((x - y).norm() < 1e-8);
        }
        assert!(rep.max_energy_drift < 1e-8);
    }

    #[test]
    fn dimension_cap_reports_suggestion() {
        let modes = one_mode(Topology::TwoQubitSymmetric, Parity::Even, 1.0, 0.05);
        let cfg = FockModelConfig { cutoffs: vec![100], dim_cap: 50, ..Default::default() };
        let err = exact_fock_oracle(&two_qubit_hamiltonian(1.0), &cfg, &modes, &linalg::basis_projector(4, 0), 1.0, 0.5);
        assert!(matches!(err, Err(Error::DimensionCap { .. })));
    }

    #[test]
    fn thermal_ensemble_weights() {
        let modes = one_mode(Topology::TwoQubitSymmetric, Parity::Even, 1.0, 0.0);
        let space = enumerate_configs(&[3], None);
        let (ens, dropped) = initial_ensemble(&modes, &space, BathInit::Thermal { theta: 0.08 }, 1e-6);
        // e^{-12.5} ~ 3.7e-6 survives, e^{-25} does not
        assert_eq!(ens.len(), 2);
        assert!(dropped < 1e-9 && dropped >= 0.0);
    }
}
