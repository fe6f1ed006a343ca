use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("configuration out of bounds: {0}")]
    OutOfBounds(String),
    #[error("start configuration is in collision")]
    StartInCollision,
    #[error("grid too large: {0} nodes (limit 1e8)")]
    GridTooLarge(u128),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("bounds mismatch: {0}")]
    BoundsMismatch(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("rollout failed: {0}")]
    Rollout(String),
    #[error("model error: {0}")]
    Model(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
