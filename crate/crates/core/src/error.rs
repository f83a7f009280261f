use thiserror::Error;

/// Errors raised across the simulator, learner and experiment layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("positions coincide; distance is zero")]
    ZeroDistance,
    #[error("secrecy rate is zero for a non-empty payload")]
    InfeasibleSecrecy,
    #[error("task must be routed to exactly one of local or offload processing")]
    RouteConflict,
    #[error("uav {uav}: no offload target reaches the minimum secrecy rate")]
    NoSecureTarget { uav: usize },
    #[error("uav {uav}: action {action} is masked")]
    MaskViolation { uav: usize, action: usize },
    #[error("joint action has {got} entries, expected {expected}")]
    JointActionSize { expected: usize, got: usize },
    #[error("episode finished; call reset first")]
    EpisodeDone,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in loss computation")]
    NonFiniteLoss,
    #[error("action mask has no feasible entry")]
    EmptyMask,
    #[error("replay group has {got} experiences, expected {expected}")]
    GroupSizeMismatch { expected: usize, got: usize },
    #[error("replay buffer holds {available} groups, {requested} requested")]
    InsufficientData { available: usize, requested: usize },
    #[error("instance too large for enumeration: {0} candidates")]
    InstanceTooLarge(u128),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: String, reason: String },
    #[error("missing checkpoint: {0}")]
    MissingCheckpoint(String),
    #[error("invalid mode combination: {0}")]
    InvalidModeCombination(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
