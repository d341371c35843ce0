use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: {left} vs {right} qubits")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported gate: {0}")]
    UnsupportedGate(String),

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("channel is not normalized (sum of rates = {0})")]
    Unnormalized(f64),

    #[error("no noise entry for hard cycle {0}")]
    UncoveredCycle(String),

    #[error("dimension too large: {n} qubits exceeds the limit of {max} for this mode")]
    DimensionTooLarge { n: usize, max: usize },

    #[error("coherent noise on cycle {0} requires twirl-averaged exact mode")]
    CoherentNoiseInExactMode(String),

    #[error("fit failed for {0}: no positive decay estimates")]
    FitFailure(String),

    #[error("insufficient benchmarking data: {0}")]
    InsufficientCurves(String),

    #[error("infeasible plan: {0}")]
    Infeasible(String),

    #[error("ill-conditioned confusion matrix on qubit {qubit}: diagonal {diag}")]
    IllConditioned { qubit: usize, diag: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
