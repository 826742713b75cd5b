use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate transform: {0}")]
    DegenerateTransform(String),
    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("ill-conditioned system (condition number {0:.3e})")]
    IllConditioned(f64),
    #[error("epipolar line is degenerate (point at the epipole)")]
    EpipoleDegenerate,
    #[error("placement infeasible: {0}")]
    Placement(String),
    #[error("sampling budget exhausted: {0}")]
    Sampling(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },
    #[error("evaluation region is empty")]
    EmptyRegion,
    #[error("no valid pixels")]
    NoValidPixels,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn mismatch(expected: impl ToString, actual: impl ToString) -> Self {
        Self::DimensionMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
