use thiserror::Error;

use crate::testkit::TrajectoryId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("test `{name}` produced a non-finite value ({value})")]
    NonFiniteTest { name: String, value: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("need at least {needed} trajectories, have {have}")]
    NotEnoughTrajectories { needed: usize, have: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("no snapshot entry for trajectory {0}")]
    MissingSnapshot(TrajectoryId),

    #[error("no target return for trajectory {0}")]
    MissingReturn(TrajectoryId),

    #[error("unknown environment `{0}`")]
    UnknownEnv(String),

    #[error("trajectory space too large to enumerate ({count} > {limit})")]
    EnumerationTooLarge { count: u128, limit: u128 },

    #[error("optimal trajectory set is empty; the task is infeasible at this horizon")]
    EmptyOptimalSet,

    #[error("distribution supports differ")]
    SupportMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("checkpoint artifact `{artifact}`: {message}")]
    Checkpoint { artifact: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
