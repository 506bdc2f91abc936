//! Time series of reduced density matrices and named observables.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub max_trace_error: f64,
    /// Largest anti-Hermitian part removed by the output symmetrization.
    pub max_hermiticity_drift: f64,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub solver: String,
    pub times: Vec<f64>,
    pub states: Vec<CMatrix>,
    pub diagnostics: Diagnostics,
}

/// Parse "rho_<row>_<col>" with binary labels of the system size, e.g.
/// "rho_10_10" for a two-qubit population or "rho_1_1" for one qubit. The
/// labels "g"/"e" are accepted for a single qubit.
pub fn parse_observable(name: &str, dim: usize) -> Result<(usize, usize)> {
    let unknown = || Error::UnknownObservable(name.to_string());
    let rest = name.strip_prefix("rho_").ok_or_else(unknown)?;
    let (a, b) = rest.split_once('_').ok_or_else(unknown)?;
    let qubits = dim.trailing_zeros() as usize;
    let label = |s: &str| -> Option<usize> {
        match (s, dim) {
            ("g", 2) => return Some(0),
            ("e", 2) => return Some(1),
            _ => {}
        }
        if s.len() != qubits || !s.chars().all(|c| c == '0' || c == '1') {
            return None;
        }
        usize::from_str_radix(s, 2).ok()
    };
    match (label(a), label(b)) {
        (Some(i), Some(j)) if i < dim && j < dim => Ok((i, j)),
        _ => Err(unknown()),
    }
}

impl Trajectory {
    /// Build from raw output states: symmetrize, then record invariants.
    pub fn from_states(solver: &str, times: Vec<f64>, raw: Vec<CMatrix>) -> Self {
        let mut diag = Diagnostics { min_eigenvalue: f64::INFINITY, ..Default::default() };
        let states = raw
            .into_iter()
            .map(|rho| {
                diag.max_hermiticity_drift = diag.max_hermiticity_drift.max(linalg::hermiticity_defect(&rho));
                let h = linalg::hermitian_part(&rho);
                diag.max_trace_error = diag.max_trace_error.max((h.trace() - linalg::ONE).norm());
                diag.min_eigenvalue = diag.min_eigenvalue.min(linalg::hermitian_eigenvalues(&h)[0]);
                h
            })
            .collect();
        Self { solver: solver.to_string(), times, states, diagnostics: diag }
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |s| s.nrows())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn element(&self, i: usize, j: usize) -> Vec<Complex64> {
        self.states.iter().map(|s| s[(i, j)]).collect()
    }

    /// Real part of a named matrix element, e.g. "rho_10_10".
    pub fn observable(&self, name: &str) -> Result<Vec<f64>> {
        let (i, j) = parse_observable(name, self.dim())?;
        Ok(self.states.iter().map(|s| s[(i, j)].re).collect())
    }

    pub fn final_state(&self) -> &CMatrix {
        self.states.last().expect("non-empty trajectory")
    }

    /// CSV with a time column, the named observables (complex values split
    /// into re_/im_ columns for off-diagonals) and optionally all entries.
    pub fn to_csv(&self, observables: &[&str], include_rho: bool) -> Result<String> {
        let dim = self.dim();
        let idx: Vec<(String, usize, usize)> = observables
            .iter()
            .map(|n| parse_observable(n, dim).map(|(i, j)| (n.to_string(), i, j)))
            .collect::<Result<_>>()?;
        let mut out = String::from("t");
        for (n, i, j) in &idx {
            if i == j {
                out.push_str(&format!(",{n}"));
            } else {
                out.push_str(&format!(",re_{n},im_{n}"));
            }
        }
        if include_rho {
            for i in 0..dim {
                for j in 0..dim {
                    out.push_str(&format!(",re_r{i}{j},im_r{i}{j}"));
                }
            }
        }
        out.push('\n');
        for (t, s) in self.times.iter().zip(&self.states) {
            out.push_str(&format!("{t:.10e}"));
            for (_, i, j) in &idx {
                let v = s[(*i, *j)];
                if i == j {
                    out.push_str(&format!(",{:.12e}", v.re));
                } else {
                    out.push_str(&format!(",{:.12e},{:.12e}", v.re, v.im));
                }
            }
            if include_rho {
                for i in 0..dim {
                    for j in 0..dim {
                        out.push_str(&format!(",{:.12e},{:.12e}", s[(i, j)].re, s[(i, j)].im));
                    }
                }
            }
            out.push('\n');
        }
        Ok(out)
    }

    /// Check the density-matrix invariants with the given slack.
    pub fn check(&self, trace_tol: f64, eig_tol: f64) -> Result<()> {
        if self.diagnostics.max_trace_error > trace_tol {
            return Err(Error::Integration(format!(
                "trace drifted by {:.3e} (tolerance {trace_tol:.1e})",
                self.diagnostics.max_trace_error
            )));
        }
        if self.diagnostics.min_eigenvalue < -eig_tol {
            return Err(Error::InvalidState(format!(
                "eigenvalue {:.3e} below -{eig_tol:.1e}",
                self.diagnostics.min_eigenvalue
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observable_names() {
        assert_eq!(parse_observable("rho_10_10", 4).unwrap(), (2, 2));
        assert_eq!(parse_observable("rho_00_00", 4).unwrap(), (0, 0));
        assert_eq!(parse_observable("rho_e_e", 2).unwrap(), (1, 1));
        assert_eq!(parse_observable("rho_1_0", 2).unwrap(), (1, 0));
        assert!(parse_observable("rho_1_1", 4).is_err());
        assert!(parse_observable("pop", 4).is_err());
    }

    #[test]
    fn csv_layout() {
        let s = linalg::basis_projector(4, 2);
        let tr = Trajectory::from_states("test", vec![0.0, 1.0], vec![s.clone(), s]);
        let csv = tr.to_csv(&["rho_10_10", "rho_00_10"], false).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,rho_10_10,re_rho_00_10,im_rho_00_10");
        assert_eq!(lines.count(), 2);
        assert_eq!(tr.observable("rho_10_10").unwrap(), vec![1.0, 1.0]);
        assert!(tr.check(1e-12, 1e-12).is_ok());
    }
}
