//! Baseline solvers used to cross-check the hierarchy: secular GKLS,
//! second-order TCL, an exact qubits-plus-Fock-modes oracle, and Rabi
//! frequency extraction.

pub mod fock;
pub mod gkls;
pub mod rabi;
pub mod tcl2;

use serde::{Deserialize, Serialize};

use crate::heom::{collective_operators, single_qubit_hamiltonian, two_qubit_hamiltonian};
use crate::linalg::{self, CMatrix};
use crate::spectra::DrudeLorentzBath;

pub use fock::{exact_fock_oracle, BathInit, FockModelConfig, FockReport};
pub use gkls::{gkls_generator, gkls_secular, transition_rate, GklsGenerator, GklsOptions};
pub use rabi::{dominant_frequency, extract_rabi_frequency, rabi_window, RabiEstimate};
pub use tcl2::{tcl2, tcl2_channels, tcl2_kernel, Tcl2Channel, Tcl2Generator};

/// A system coupled to continuum Drude-Lorentz baths, one per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuumModel {
    pub hamiltonian: CMatrix,
    pub channels: Vec<(CMatrix, DrudeLorentzBath)>,
}

impl ContinuumModel {
    /// Two qubits; the even and odd sectors carry identical baths.
    pub fn two_qubit(omega_q: f64, bath: DrudeLorentzBath) -> Self {
        let (lp, lm) = collective_operators();
        Self { hamiltonian: two_qubit_hamiltonian(omega_q), channels: vec![(lp, bath), (lm, bath)] }
    }

    pub fn single_qubit(omega_q: f64, bath: DrudeLorentzBath) -> Self {
        Self { hamiltonian: single_qubit_hamiltonian(omega_q), channels: vec![(linalg::sigma_y(), bath)] }
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }
}

/// Eigen-decomposition of a Hermitian matrix grouped into degenerate levels:
/// (energy, projector) pairs in ascending energy.
pub(crate) fn energy_levels(h: &CMatrix, tol: f64) -> Vec<(f64, CMatrix)> {
    let eig = linalg::hermitian_part(h).symmetric_eigen();
    let n = h.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut levels: Vec<(f64, Vec<usize>)> = Vec::new();
    for k in order {
        let e = eig.eigenvalues[k];
        match levels.last_mut() {
            Some((e0, members)) if (e - *e0).abs() <= tol => members.push(k),
            _ => levels.push((e, vec![k])),
        }
    }
    levels
        .into_iter()
        .map(|(e, members)| {
            let mut p = CMatrix::zeros(n, n);
            for k in members {
                let v = eig.eigenvectors.column(k);
                p += &v * v.adjoint();
            }
            (e, p)
        })
        .collect()
}

/// Split A into Bohr-frequency components A(w) = sum_{E'-E=w} P_E A P_E'.
/// A(w) lowers the system energy by w.
pub(crate) fn eigenoperators(h: &CMatrix, a: &CMatrix, tol: f64) -> Vec<(f64, CMatrix)> {
    let levels = energy_levels(h, tol);
    let mut out: Vec<(f64, CMatrix)> = Vec::new();
    for (e, p) in &levels {
        for (e2, p2) in &levels {
            let w = e2 - e;
            let part = p * a * p2;
            if part.iter().all(|z| z.norm() < 1e-14) {
                continue;
            }
            match out.iter_mut().find(|(w0, _)| (w0 - w).abs() <= tol) {
                Some((_, acc)) => *acc += part,
                None => out.push((w, part)),
            }
        }
    }
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collective_eigenoperators() {
        let model = ContinuumModel::two_qubit(1.0, DrudeLorentzBath::new(0.1, 1.0, 1.0).unwrap());
        let parts = eigenoperators(&model.hamiltonian, &model.channels[0].0, 1e-9);
        assert_eq!(parts.len(), 2);
        assert!((parts[0].0 + 1.0).abs() < 1e-12 && (parts[1].0 - 1.0).abs() < 1e-12);
        // lowering part of sigma_y x 1 + 1 x sigma_y is -i (sigma_- x 1 + 1 x sigma_-)
        let sm = linalg::sigma_minus();
        let id = linalg::identity(2);
        let expected = (linalg::kron(&sm, &id) + linalg::kron(&id, &sm)) * (-linalg::I);
        assert!((&parts[1].1 - expected).norm() < 1e-12);
        let total: CMatrix = parts.iter().map(|p| p.1.clone()).fold(CMatrix::zeros(4, 4), |a, b| a + b);
        assert!((total - &model.channels[0].0).norm() < 1e-12);
    }
}
