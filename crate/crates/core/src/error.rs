use thiserror::Error;

/// Errors raised across the crate. Agent indices in messages are 1-based.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("network is not strongly connected: agent {from} cannot reach agent {to}")]
    NotStronglyConnected { from: usize, to: usize },
    #[error("link ({from},{to}) has non-positive delay {delay}")]
    NonPositiveDelay { from: usize, to: usize, delay: i64 },
    #[error("duplicate link ({from},{to})")]
    DuplicateLink { from: usize, to: usize },
    #[error("explicit self-loop on agent {agent}; self-loops are implicit with delay 0")]
    ExplicitSelfLoop { agent: usize },
    #[error("agent index {index} out of range 1..={agents}")]
    AgentOutOfRange { index: usize, agents: usize },
    #[error("distribution {what} is not normalized (sum = {sum})")]
    DistributionNotNormalized { what: String, sum: f64 },
    #[error("shape mismatch in {what}")]
    ShapeMismatch { what: String },
    #[error("agent count mismatch: network has {network}, system has {system}")]
    AgentCountMismatch { network: usize, system: usize },
    #[error("strategy domain mismatch: {what}")]
    DomainMismatch { what: String },
    #[error("inaccessible information L[k,i] needs i >= k (got k={k}, i={i})")]
    IndexOrder { k: usize, i: usize },
    #[error("value {value} out of range for {what} (size {size})")]
    OutOfRange { what: String, value: usize, size: usize },
    #[error("search size {required} exceeds cap {cap}")]
    CapExceeded { required: String, cap: u64 },
    #[error("schema mismatch: {what}")]
    SchemaMismatch { what: String },
    #[error("accessible realization has zero probability")]
    ZeroProbabilityCondition,
    #[error("observation has zero probability under the given belief and prescription")]
    ImpossibleObservation,
    #[error("missing conditional information state for realization {realization:?}")]
    MissingConditional { realization: Vec<usize> },
    #[error("cannot parse instance: {0}")]
    Parse(String),
    #[error("solver costs disagree: {what}")]
    CostMismatch { what: String },
}

pub type Result<T> = std::result::Result<T, Error>;
