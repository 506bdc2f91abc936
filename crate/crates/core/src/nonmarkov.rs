//! Trace distance, the BLP information-backflow measure and its evaluation
//! over sampled initial-state pairs and parameter grids.

use std::fmt::Write as _;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heom::{propagate_raw, Hierarchy};
use crate::linalg::{self, c, CMatrix, ONE};
use crate::ode::IntegratorConfig;
use crate::reference::GklsGenerator;
use crate::spectra::resonance_locus;
use crate::trajectory::Trajectory;

/// Half the trace norm of rho1 - rho2.
pub fn trace_distance(rho1: &CMatrix, rho2: &CMatrix) -> Result<f64> {
    if rho1.shape() != rho2.shape() {
        return Err(Error::DimensionMismatch { expected: rho1.nrows(), got: rho2.nrows() });
    }
    Ok(hermitian_trace_norm(&(rho1 - rho2)) / 2.0)
}

fn hermitian_trace_norm(x: &CMatrix) -> f64 {
    linalg::hermitian_part(x).symmetric_eigenvalues().iter().map(|e| e.abs()).sum()
}

/// Sum of the positive increments of D along the grid.
pub fn blp_from_distances(distances: &[f64]) -> f64 {
    distances.windows(2).map(|w| (w[1] - w[0]).max(0.0)).sum()
}

pub fn blp_functional(traj1: &Trajectory, traj2: &Trajectory) -> Result<f64> {
    if traj1.times.len() != traj2.times.len()
        || traj1.times.iter().zip(&traj2.times).any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0))
    {
        return Err(Error::MisalignedGrids);
    }
    let d = traj1
        .states
        .iter()
        .zip(&traj2.states)
        .map(|(a, b)| trace_distance(a, b))
        .collect::<Result<Vec<_>>>()?;
    Ok(blp_from_distances(&d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairKind {
    OrthogonalPure,
    PauliDelta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePair {
    pub rho1: CMatrix,
    pub rho2: CMatrix,
    pub kind: PairKind,
}

fn random_vector(rng: &mut ChaCha20Rng, d: usize) -> Vec<Complex64> {
    (0..d)
        .map(|_| Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)))
        .collect()
}

fn normalize(v: &mut [Complex64]) {
    let n: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in v.iter_mut() {
        *z /= n;
    }
}

/// Traceless Hermitian Pauli products of n qubits (identity excluded).
pub fn pauli_basis(dim: usize) -> Result<Vec<CMatrix>> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::Domain(format!("Pauli basis needs a qubit register, got dimension {dim}")));
    }
    let single = [linalg::identity(2), linalg::sigma_x(), linalg::sigma_y(), linalg::sigma_z()];
    let qubits = dim.trailing_zeros() as usize;
    let mut out = Vec::with_capacity(dim * dim - 1);
    for code in 1..dim * dim {
        let mut m = CMatrix::identity(1, 1);
        let mut rest = code;
        for _ in 0..qubits {
            m = linalg::kron(&m, &single[rest % 4]);
            rest /= 4;
        }
        out.push(m);
    }
    Ok(out)
}

fn orthogonal_pure(rng: &mut ChaCha20Rng, d: usize) -> StatePair {
    let mut psi = random_vector(rng, d);
    normalize(&mut psi);
    let mut phi = random_vector(rng, d);
    let overlap: Complex64 = psi.iter().zip(&phi).map(|(a, b)| a.conj() * b).sum();
    for (p, a) in phi.iter_mut().zip(&psi) {
        *p -= a * overlap;
    }
    normalize(&mut phi);
    StatePair { rho1: linalg::projector(&psi), rho2: linalg::projector(&phi), kind: PairKind::OrthogonalPure }
}

const MAX_ATTEMPTS: usize = 100_000;

fn pauli_delta(rng: &mut ChaCha20Rng, basis: &[CMatrix], d: usize) -> Result<StatePair> {
    for _ in 0..MAX_ATTEMPTS {
        // Hilbert-Schmidt random center
        let g = CMatrix::from_fn(d, d, |_, _| {
            Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
        });
        let w = &g * g.adjoint();
        let center = &w / w.trace();
        // direction on the unit sphere of Pauli coefficients
        let mut u: Vec<f64> = (0..basis.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        u.iter_mut().for_each(|x| *x /= n);
        let mut delta = CMatrix::zeros(d, d);
        for (coef, p) in u.iter().zip(basis) {
            delta += p * c(*coef, 0.0);
        }
        let op_norm = linalg::hermitian_eigenvalues(&delta).iter().fold(0.0f64, |a, e| a.max(e.abs()));
        let scale: f64 = rng.random::<f64>() * 2.0 / op_norm;
        let delta = delta * c(scale, 0.0);
        let half = &delta * c(0.5, 0.0);
        let rho1 = &center + &half;
        let rho2 = &center - &half;
        if linalg::hermitian_eigenvalues(&rho1)[0] >= 0.0 && linalg::hermitian_eigenvalues(&rho2)[0] >= 0.0 {
            return Ok(StatePair { rho1, rho2, kind: PairKind::PauliDelta });
        }
    }
    Err(Error::Sampling(format!("no positive pair after {MAX_ATTEMPTS} draws")))
}

fn pair_rng(seed: u64, kind: PairKind, index: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let lane = match kind {
        PairKind::OrthogonalPure => 0u64,
        PairKind::PauliDelta => 1u64 << 63,
    };
    rng.set_stream(lane | index as u64);
    rng
}

/// `count` pairs of one kind. Pair i uses its own ChaCha stream derived from
/// the seed, so any subset can be regenerated independently.
pub fn sample_state_pairs(dim: usize, kind: PairKind, count: usize, seed: u64) -> Result<Vec<StatePair>> {
    if count == 0 {
        return Err(Error::Domain("pair count must be at least 1".into()));
    }
    let basis = match kind {
        PairKind::PauliDelta => pauli_basis(dim)?,
        PairKind::OrthogonalPure => Vec::new(),
    };
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = pair_rng(seed, kind, i);
            match kind {
                PairKind::OrthogonalPure => Ok(orthogonal_pure(&mut rng, dim)),
                PairKind::PauliDelta => pauli_delta(&mut rng, &basis, dim),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub orthogonal_pure: usize,
    pub pauli_delta: usize,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self { orthogonal_pure: 150, pauli_delta: 50, seed: 0x5eed }
    }
}

impl SamplingConfig {
    pub fn pairs(&self, dim: usize) -> Result<Vec<StatePair>> {
        let mut pairs = sample_state_pairs(dim, PairKind::OrthogonalPure, self.orthogonal_pure.max(1), self.seed)?;
        if self.pauli_delta > 0 {
            pairs.extend(sample_state_pairs(dim, PairKind::PauliDelta, self.pauli_delta, self.seed)?);
        }
        Ok(pairs)
    }
}

/// Linear map rho(0) -> rho(t) on a time grid, stored as d^2 x d^2 matrices
/// acting on the row-major vectorization.
#[derive(Debug, Clone)]
pub struct DynamicalMap {
    pub dim: usize,
    pub times: Vec<f64>,
    pub maps: Vec<CMatrix>,
}

impl DynamicalMap {
    /// Build from the evolution of the d^2 matrix units E_ij.
    pub fn from_basis_evolution<F>(dim: usize, evolve: F) -> Result<Self>
    where
        F: Fn(&CMatrix) -> Result<(Vec<f64>, Vec<CMatrix>)> + Sync,
    {
        let d2 = dim * dim;
        // the dynamics preserve Hermiticity, so E_ji evolves into the adjoint
        // of the image of E_ij and only the upper triangle is propagated
        let upper: Vec<usize> = (0..d2).filter(|k| k / dim <= k % dim).collect();
        let evolved: Vec<(Vec<f64>, Vec<CMatrix>)> = upper
            .par_iter()
            .map(|&k| {
                let mut e = CMatrix::zeros(dim, dim);
                e[(k / dim, k % dim)] = ONE;
                evolve(&e)
            })
            .collect::<Result<_>>()?;
        let mut slots: Vec<Option<(Vec<f64>, Vec<CMatrix>)>> = vec![None; d2];
        for (&k, run) in upper.iter().zip(evolved) {
            let (i, j) = (k / dim, k % dim);
            if i != j {
                slots[j * dim + i] = Some((run.0.clone(), run.1.iter().map(|m| m.adjoint()).collect()));
            }
            slots[k] = Some(run);
        }
        let runs: Vec<(Vec<f64>, Vec<CMatrix>)> = slots.into_iter().map(|r| r.expect("filled")).collect();
        let times = runs[0].0.clone();
        let maps = (0..times.len())
            .map(|i| {
                let mut m = CMatrix::zeros(d2, d2);
                for (col, run) in runs.iter().enumerate() {
                    let v = linalg::flatten(&run.1[i]);
                    for (row, x) in v.into_iter().enumerate() {
                        m[(row, col)] = x;
                    }
                }
                m
            })
            .collect();
        Ok(Self { dim, times, maps })
    }

    pub fn apply(&self, index: usize, rho: &CMatrix) -> CMatrix {
        let v = DVector::from_vec(linalg::flatten(rho));
        let out = &self.maps[index] * v;
        linalg::unflatten(out.as_slice(), self.dim)
    }

    /// Trace distance of the evolved pair at every grid time.
    pub fn distances(&self, pair: &StatePair) -> Vec<f64> {
        let delta = DVector::from_vec(linalg::flatten(&(&pair.rho1 - &pair.rho2)));
        self.maps
            .iter()
            .map(|m| hermitian_trace_norm(&linalg::unflatten((m * &delta).as_slice(), self.dim)) / 2.0)
            .collect()
    }

    /// Same map on every other grid point (dt doubled).
    pub fn coarsened(&self) -> Self {
        Self {
            dim: self.dim,
            times: self.times.iter().step_by(2).copied().collect(),
            maps: self.maps.iter().step_by(2).cloned().collect(),
        }
    }
}

pub fn heom_map(hierarchy: &Hierarchy, t_end: f64, dt_out: f64, cfg: &IntegratorConfig) -> Result<DynamicalMap> {
    DynamicalMap::from_basis_evolution(hierarchy.dim(), |e| {
        let (t, s, _) = propagate_raw(hierarchy, e, t_end, dt_out, cfg)?;
        Ok((t, s))
    })
}

pub fn gkls_map(generator: &GklsGenerator, t_end: f64, dt_out: f64) -> Result<DynamicalMap> {
    let times = crate::ode::uniform_grid(t_end, dt_out);
    let d2 = generator.dim() * generator.dim();
    let mut maps = vec![CMatrix::identity(d2, d2)];
    for w in times.windows(2) {
        let step = linalg::expm(&(&generator.liouvillian * c(w[1] - w[0], 0.0)));
        let next = step * maps.last().expect("non-empty");
        maps.push(next);
    }
    Ok(DynamicalMap { dim: generator.dim(), times, maps })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlpResult {
    pub value: f64,
    pub best_pair: StatePair,
    pub per_sample: Vec<f64>,
    pub sample_count: usize,
    pub seed: u64,
}

/// Maximize the positive-increment functional over the sampled pairs.
pub fn blp_measure(map: &DynamicalMap, sampling: &SamplingConfig) -> Result<BlpResult> {
    let pairs = sampling.pairs(map.dim)?;
    blp_over_pairs(map, pairs, sampling.seed)
}

pub fn blp_over_pairs(map: &DynamicalMap, pairs: Vec<StatePair>, seed: u64) -> Result<BlpResult> {
    if pairs.is_empty() {
        return Err(Error::Domain("no state pairs".into()));
    }
    let per_sample: Vec<f64> = pairs.par_iter().map(|p| blp_from_distances(&map.distances(p))).collect();
    let (best, value) = per_sample
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    Ok(BlpResult {
        value,
        best_pair: pairs[best].clone(),
        sample_count: pairs.len(),
        per_sample,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlpMap {
    /// gamma / omega_q, columns
    pub gammas: Vec<f64>,
    /// theta, rows
    pub thetas: Vec<f64>,
    /// values[row][col]; None where the point failed
    pub values: Vec<Vec<Option<f64>>>,
    pub failures: Vec<(usize, usize, String)>,
    /// gamma_res(theta) per row, single-qubit maps only
    pub locus: Option<Vec<f64>>,
}

/// Evaluate `point(gamma, theta)` on the lattice. Failures are recorded and
/// the map continues. `on_point` is called after every point (for
/// checkpointing); points already present in `done` are not recomputed.
pub fn blp_map<F, G>(
    gammas: &[f64],
    thetas: &[f64],
    with_locus: bool,
    done: &[(usize, usize, f64)],
    point: F,
    on_point: G,
) -> BlpMap
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
    G: Fn(usize, usize, &Result<f64>) + Sync,
{
    let mut values = vec![vec![None; gammas.len()]; thetas.len()];
    for &(r, cidx, v) in done {
        if r < thetas.len() && cidx < gammas.len() {
            values[r][cidx] = Some(v);
        }
    }
    let todo: Vec<(usize, usize)> = (0..thetas.len())
        .flat_map(|r| (0..gammas.len()).map(move |cidx| (r, cidx)))
        .filter(|&(r, cidx)| values[r][cidx].is_none())
        .collect();
    let results: Vec<(usize, usize, Result<f64>)> = todo
        .par_iter()
        .map(|&(r, cidx)| {
            let res = point(gammas[cidx], thetas[r]);
            on_point(r, cidx, &res);
            (r, cidx, res)
        })
        .collect();
    let mut failures = Vec::new();
    for (r, cidx, res) in results {
        match res {
            Ok(v) => values[r][cidx] = Some(v),
            Err(e) => failures.push((r, cidx, e.to_string())),
        }
    }
    let locus = with_locus.then(|| thetas.iter().map(|&t| resonance_locus(t)).collect());
    BlpMap { gammas: gammas.to_vec(), thetas: thetas.to_vec(), values, failures, locus }
}

impl BlpMap {
    /// Rows theta, columns gamma; failed points are empty cells. A trailing
    /// column carries the resonance locus when present.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta");
        for g in &self.gammas {
            let _ = write!(out, ",gamma={g:.6e}");
        }
        if self.locus.is_some() {
            out.push_str(",gamma_res");
        }
        out.push('\n');
        for (r, theta) in self.thetas.iter().enumerate() {
            let _ = write!(out, "{theta:.6e}");
            for v in &self.values[r] {
                match v {
                    Some(x) => {
                        let _ = write!(out, ",{x:.8e}");
                    }
                    None => out.push(','),
                }
            }
            if let Some(locus) = &self.locus {
                let _ = write!(out, ",{:.8e}", locus[r]);
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_distance_examples() {
        let g = linalg::basis_projector(2, 0);
        let e = linalg::basis_projector(2, 1);
        let mixed = linalg::identity(2) * c(0.5, 0.0);
        assert!((trace_distance(&g, &e).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(trace_distance(&g, &g).unwrap(), 0.0);
        assert!((trace_distance(&g, &mixed).unwrap() - 0.5).abs() < 1e-15);
        assert!(trace_distance(&g, &linalg::identity(4)).is_err());
    }

    #[test]
    fn functional_examples() {
        assert_eq!(blp_from_distances(&[1.0, 0.8, 0.5, 0.1]), 0.0);
        let bump = [1.0, 0.6, 0.7, 0.85, 0.5, 0.2];
        assert!((blp_from_distances(&bump) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn sampled_pairs_are_valid_and_reproducible() {
        for dim in [2, 4] {
            let a = sample_state_pairs(dim, PairKind::OrthogonalPure, 20, 7).unwrap();
            for p in &a {
                linalg::validate_density_matrix(&p.rho1, 1e-12).unwrap();
                linalg::validate_density_matrix(&p.rho2, 1e-12).unwrap();
                assert!((trace_distance(&p.rho1, &p.rho2).unwrap() - 1.0).abs() < 1e-12);
            }
            let b = sample_state_pairs(dim, PairKind::PauliDelta, 20, 7).unwrap();
            for p in &b {
                linalg::validate_density_matrix(&p.rho1, 1e-12).unwrap();
                linalg::validate_density_matrix(&p.rho2, 1e-12).unwrap();
            }
            assert_eq!(b, sample_state_pairs(dim, PairKind::PauliDelta, 20, 7).unwrap());
            assert_ne!(b, sample_state_pairs(dim, PairKind::PauliDelta, 20, 8).unwrap());
            // prefix property of the per-pair streams
            assert_eq!(a[..5], sample_state_pairs(dim, PairKind::OrthogonalPure, 5, 7).unwrap()[..]);
        }
        assert_eq!(pauli_basis(4).unwrap().len(), 15);
    }

    #[test]
    fn unitary_map_gives_zero() {
        let h = crate::heom::two_qubit_hamiltonian(1.0);
        let times: Vec<f64> = (0..50).map(|k| k as f64 * 0.2).collect();
        let map = DynamicalMap::from_basis_evolution(4, |e| {
            Ok((
                times.clone(),
                times
                    .iter()
                    .map(|&t| {
                        let u = linalg::unitary_propagator(&h, t);
                        &u * e * u.adjoint()
                    })
                    .collect(),
            ))
        })
        .unwrap();
        let res = blp_measure(&map, &SamplingConfig { orthogonal_pure: 10, pauli_delta: 10, seed: 1 }).unwrap();
        assert!(res.value < 1e-12);
    }
}
