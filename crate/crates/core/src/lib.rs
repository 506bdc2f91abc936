//! Transmission-line circuits as structured bosonic environments: mode sets,
//! Drude-Lorentz baths, exponential decompositions, HEOM and reference
//! dynamics, and the BLP non-Markovianity measure.
//!
//! Internally all frequencies are in units of the qubit frequency and
//! hbar = k_B = 1, so temperatures enter as theta = k_B T / (hbar omega_q).

pub mod circuit;
pub mod decomposition;
pub mod error;
pub mod linalg;
pub mod nonmarkov;
pub mod ode;
pub mod quad;
pub mod special;
pub mod spectra;
pub mod trajectory;
pub mod heom;
pub mod reference;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
