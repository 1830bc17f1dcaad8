use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,

    #[error("non-finite value {value} at position {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("order statistic arity must be at least 1, got {0}")]
    InvalidArity(usize),

    #[error("invalid belief: {0}")]
    InvalidBelief(String),

    #[error("degenerate two-point support at {0} with the moment strictly inside")]
    DegenerateSupport(f64),

    #[error("bid {bid} exceeds value {value}")]
    DominatedBid { value: f64, bid: f64 },

    #[error("value {value} lies below the lowest believed bid {low}")]
    ValueBelowSupport { value: f64, low: f64 },

    #[error("cost {cost} lies above the highest believed bid {high}")]
    CostAboveSupport { cost: f64, high: f64 },

    #[error("{} bid(s) outside belief support [{low}, {high}], first offenders: {:?}", offenders.len(), &offenders[..offenders.len().min(5)])]
    BidOutsideSupport {
        low: f64,
        high: f64,
        /// `(position, bid)` pairs.
        offenders: Vec<(usize, f64)>,
    },

    #[error("infeasible belief: {0}")]
    InfeasibleBelief(String),

    #[error("solver failure in {context}: {detail}")]
    SolverFailure { context: String, detail: String },

    #[error("kernel density underflow at bid {bid}")]
    DensityUnderflow { bid: f64 },

    #[error("collinear design; columns involved: {}", columns.join(", "))]
    CollinearDesign { columns: Vec<String> },

    #[error("not enough variation: {0}")]
    NotEnoughVariation(String),

    #[error("ragged structured sample: row {row} has {len} bids, expected {expected}")]
    RaggedSample {
        row: usize,
        len: usize,
        expected: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid record {index}: {reason}")]
    InvalidRecord { index: usize, reason: String },
}

impl Error {
    pub(crate) fn solver(context: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::SolverFailure {
            context: context.into(),
            detail: detail.into(),
        }
    }
}
