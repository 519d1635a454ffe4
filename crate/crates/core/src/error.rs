use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("user {user} has an all-zero effective channel")]
    ZeroChannel { user: usize },

    #[error("matrix is rank deficient (rank {rank}, need {needed})")]
    RankDeficient { rank: usize, needed: usize },

    #[error("objective became non-finite")]
    NonFiniteObjective,

    #[error("constructive-interference constraints are infeasible (best min slack {min_slack:e})")]
    Infeasible { min_slack: f64 },

    #[error("{combos} symbol combinations exceed the cap of {cap}")]
    CombinatorialCap { combos: u128, cap: usize },

    #[error("cluster index {index} out of range for {clusters} clusters")]
    IndexOutOfRange { index: usize, clusters: usize },

    #[error("degenerate objective: {0}")]
    DegenerateObjective(String),

    #[error("search space of {size} points exceeds the limit of {limit}")]
    SearchSpaceTooLarge { size: u128, limit: u128 },

    #[error("channel set carries no active-relay blocks")]
    MissingActiveChannels,

    #[error("channel set carries no eavesdropper blocks")]
    MissingEveChannels,

    #[error("rate demand {demand} exceeds the attainable {attainable} bit/s/Hz")]
    DemandInfeasible { demand: f64, attainable: f64 },

    #[error("bs_broadcast refresh at slot {slot} without a BS precoder")]
    MissingBroadcast { slot: u64 },

    #[error("missing quantization depth for a non-discrete feasibility set")]
    MissingQuantizationDepth,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error for `{key}` (line {line}): {message}")]
    Validation { key: String, line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
