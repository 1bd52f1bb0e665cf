use thiserror::Error;

/// Errors produced by belief, simulator, and planner operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid spec: {0}")]
    InvalidGridSpec(String),

    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),

    #[error("ray direction must be non-zero and finite")]
    ZeroDirection,

    #[error("grid dimensions do not match: {0}")]
    DimensionMismatch(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("infeasible push: {0}")]
    InfeasiblePush(String),

    #[error("invalid observation: {0}")]
    InvalidObservation(String),

    #[error("invalid generator params: {0}")]
    InvalidParams(String),

    #[error("need at least {needed} viewpoints, got {got}")]
    TooFewViews { needed: usize, got: usize },

    #[error("sample count must be at least 1")]
    ZeroSamples,

    #[error("empty push candidate list")]
    NoPushCandidates,

    #[error("target vector is not one-hot")]
    NotOneHot,

    #[error("policy '{0}' requires privileged scene access")]
    MissingPrivilegedScene(String),

    #[error("unknown policy '{0}'")]
    UnknownPolicy(String),
}

pub type Result<T> = std::result::Result<T, Error>;
