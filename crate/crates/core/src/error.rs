use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Why a series over return times is known (or suspected) to diverge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DivergenceWitness {
    /// Every term of the series is at least `lower`, so the sum is infinite.
    TermsBoundedBelow { lower: f64 },
    /// The weights grow like `exp(rate * n)`.
    ExponentialGrowth { rate: f64 },
    /// No comparison series could be bounded; divergence is not proven.
    Unbounded { reason: String },
}

impl DivergenceWitness {
    /// True when the witness proves divergence rather than merely failing to bound it.
    pub fn is_certified(&self) -> bool {
        !matches!(self, DivergenceWitness::Unbounded { .. })
    }

    pub fn describe(&self) -> String {
        match self {
            DivergenceWitness::TermsBoundedBelow { lower } => {
                format!("terms bounded below by {lower:e}")
            }
            DivergenceWitness::ExponentialGrowth { rate } => {
                format!("terms grow exponentially at rate {rate:e}")
            }
            DivergenceWitness::Unbounded { reason } => format!("tail not bounded: {reason}"),
        }
    }
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("root solver failed: {0}")]
    SolverFailure(String),

    #[error("index {index} out of range (cached up to {max})")]
    Range { index: usize, max: usize },

    #[error("value overflows f64; log-scale value {log_value}")]
    Overflow { log_value: f64 },

    #[error("did not converge: {0}")]
    NonConvergent(String),

    #[error("depth {depth} exceeds the cap {cap}")]
    DepthExceeded { depth: usize, cap: usize },

    #[error("divergent tail: {}", .0.describe())]
    DivergentTail(DivergenceWitness),

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("no negative margin: {0}")]
    NoNegativeMargin(String),

    #[error("graph too large: {nodes} nodes exceed the limit {limit} (largest feasible depth: {feasible_depth:?})")]
    GraphTooLarge { nodes: usize, limit: usize, feasible_depth: Option<usize> },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
