use thiserror::Error;

/// Errors raised by graph construction, gossip validation, environments,
/// agents and the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("graph generation failed after {attempts} attempts: {reason}")]
    GenerationFailed { attempts: usize, reason: String },

    #[error("graph is disconnected: node {from} cannot reach node {to}")]
    Unreachable { from: usize, to: usize },

    #[error("numerical failure in {what} after {iterations} iterations")]
    Numerical {
        what: &'static str,
        iterations: usize,
    },

    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: String },

    #[error("invalid gossip matrix: {0}")]
    InvalidGossip(String),

    #[error("gossip weights sum to {sum}, expected 1")]
    GossipWeights { sum: f64 },

    #[error("gossip matrix is not mixing (sigma2 = {sigma2})")]
    NonMixing { sigma2: f64 },

    #[error("invalid environment: {0}")]
    InvalidSpec(String),

    #[error("round {t} out of range (horizon {horizon})")]
    RoundOutOfRange { t: usize, horizon: usize },

    #[error("invalid probability distribution: {0}")]
    Distribution(String),

    #[error("selection probability {p} for arm {arm} is not positive")]
    ZeroProbability { arm: usize, p: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("empty cohort: no user rated every genre")]
    EmptyCohort,

    #[error("horizon {horizon} is shorter than {count} ratings of agent {agent} on genre {genre}")]
    InvalidHorizon {
        horizon: usize,
        agent: usize,
        genre: usize,
        count: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
