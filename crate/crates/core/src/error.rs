use thiserror::Error;

use crate::decomposition::CorrelationSeries;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("mode set must contain at least one mode")]
    EmptyModeSet,

    #[error("root bracketing failed for mode n = {n}")]
    RootBracket { n: usize },

    #[error("divergent quantity: {0}")]
    Divergence(String),

    #[error(
        "Matsubara pole collision at k = {k} (beta*gamma = 2*pi*k); perturb gamma slightly"
    )]
    DegeneratePole { k: usize },

    #[error("exponential fit residual {residual:.3e} exceeds threshold {threshold:.3e}")]
    FitFailure {
        residual: f64,
        threshold: f64,
        best: Box<CorrelationSeries>,
    },

    #[error("invalid correlation series: {0}")]
    InvalidSeries(String),

    #[error("step size collapsed at t = {t:.6e} (h = {h:.3e}); stiffest hierarchy tier {tier}")]
    Stiffness { t: f64, h: f64, tier: usize },

    #[error("integration failure: {0}")]
    Integration(String),

    #[error("Hilbert dimension {dim} exceeds cap {cap}; {suggestion}")]
    DimensionCap {
        dim: usize,
        cap: usize,
        suggestion: String,
    },

    #[error("unsupported bath: {0}")]
    UnsupportedBath(String),

    #[error("no oscillation peak above the noise floor in '{0}'")]
    NoOscillation(String),

    #[error("state-pair sampling failed: {0}")]
    Sampling(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("time grids are misaligned")]
    MisalignedGrids,

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("unknown observable '{0}'")]
    UnknownObservable(String),

    #[error("pair {index}: {source}")]
    Pair {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::RootBracket { .. }
            | Error::Divergence(_)
            | Error::DegeneratePole { .. }
            | Error::FitFailure { .. }
            | Error::Stiffness { .. }
            | Error::Integration(_)
            | Error::NoOscillation(_)
            | Error::Sampling(_) => true,
            Error::Pair { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
