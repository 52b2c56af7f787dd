use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate time horizon: tf ({tf}) must exceed t0 ({t0})")]
    DegenerateHorizon { t0: f64, tf: f64 },

    #[error("basis degree {degree} needs at least {need} time samples, got {n_p}")]
    TooFewSamples { degree: usize, need: usize, n_p: usize },

    #[error("boundary system is rank deficient: rank {rank} < {rows} rows (degree {degree} < 3?)")]
    RankDeficientBoundary { rank: usize, rows: usize, degree: usize },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("obstacle {index} has {got} center samples, expected {expected}")]
    ObstacleGrid { index: usize, expected: usize, got: usize },

    #[error("singular KKT matrix (size {size}, numerical rank {rank})")]
    SingularKkt { size: usize, rank: usize },

    #[error("covariance is not positive semidefinite even after jitter {jitter:e}")]
    CholeskyFailed { jitter: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("selection size {k} exceeds population {len}")]
    SelectionTooLarge { k: usize, len: usize },

    #[error("degenerate path segment: start and goal coincide")]
    DegenerateSegment,

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("environment generation exhausted its rejection budget after {attempts} attempts")]
    RejectionBudget { attempts: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
