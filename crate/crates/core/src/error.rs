use thiserror::Error;

/// Errors raised by the simulation, solver and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid initial profile: {0}")]
    InvalidProfile(String),

    #[error("site {site} carries label {label}, expected a label below {n_species}")]
    InvalidLabel {
        site: usize,
        label: u8,
        n_species: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operation requires the two-species model, got {0} species")]
    NotBinary(usize),

    #[error("{bins} bins do not divide {n_sites} sites (nearest admissible: {suggestion})")]
    BinsDoNotDivide {
        bins: usize,
        n_sites: usize,
        suggestion: usize,
    },

    #[error("time step {dt:e} violates the stability bound, maximal admissible dt is {max_dt:e}")]
    Cfl { dt: f64, max_dt: f64 },

    #[error("drift matrix is not antisymmetric: alpha[{k}][{l}] + alpha[{l}][{k}] = {defect:e}")]
    NotAntisymmetric { k: usize, l: usize, defect: f64 },

    #[error("test function is not periodic: |psi(0) - psi(1)| = {0:e}")]
    NotPeriodic(f64),

    #[error("event-resolved trajectory required")]
    EventLogRequired,

    #[error("at least two time slices are required, got {0}")]
    TooFewSlices(usize),

    #[error("state space of {0} configurations exceeds the oracle limit")]
    StateSpaceTooLarge(u64),

    #[error("at least {needed} system sizes are required for a fit, got {got}")]
    TooFewSizes { needed: usize, got: usize },

    #[error("missing configuration key `{0}`")]
    MissingKey(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
