use thiserror::Error;

/// Errors raised by the library. Mathematical rejections that carry
/// diagnostics are returned as values by the relevant modules instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("unknown coefficient name `{0}`")]
    UnknownCoefficient(String),
    #[error("letter {letter} outside grid {grid:?}")]
    LetterOutOfGrid { letter: String, grid: (usize, usize) },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("matrix is not Hermitian (asymmetry {0:e})")]
    NotHermitian(f64),
    #[error("point not in the open ball: norm {0}")]
    NotInBall(f64),
    #[error("tuple is not nilpotent of the requested order: word {word} has norm {norm:e}")]
    NotNilpotent { word: String, norm: f64 },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("budget exhausted: {0}")]
    Budget(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
