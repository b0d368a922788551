use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no points")]
    NoPoints,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dirichlet concentration must be positive, got alpha[{index}] = {value}")]
    InvalidAlpha { index: usize, value: f64 },

    #[error("expected {expected} beam centers, got {got}")]
    BeamCountMismatch { expected: usize, got: usize },

    #[error("population grid: {0}")]
    PopulationGrid(String),

    #[error(
        "qp solver did not converge after {iterations} iterations (kkt residual {residual:.3e})"
    )]
    NotConverged {
        iterations: usize,
        residual: f64,
        best: Box<crate::allocation::AllocationSolution>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("unknown metric `{0}`")]
    UnknownMetric(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
