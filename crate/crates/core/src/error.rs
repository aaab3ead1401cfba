use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown configuration keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),

    #[error("degenerate geometry: {0}")]
    Geometry(String),

    #[error("nonpositive bandwidth {0} Hz")]
    Bandwidth(f64),

    #[error("infeasible allocation for device {device}: {reason}")]
    InfeasibleAllocation { device: usize, reason: String },

    #[error("completed outcome without a task record")]
    MissingTask,

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error(
        "flat action space (M+1)^N = {size} exceeds the limit of {limit}; \
         the joint action space grows exponentially in the number of devices"
    )]
    ActionSpace { size: u128, limit: u128 },

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("invalid action: {0}")]
    Action(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("empty evaluation: {0}")]
    EmptyEvaluation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
