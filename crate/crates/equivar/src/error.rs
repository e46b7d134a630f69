use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not a rotation (orthogonality/determinant error {0:.3e})")]
    NotARotation(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("bandlimit overflow: need degree {needed}, table covers {available}")]
    BandlimitOverflow { needed: usize, available: usize },
    #[error("non-manifold mesh: {0}")]
    NonManifold(String),
    #[error("kernel constraint violated: residual {0:.3e}")]
    KernelConstraintViolated(f64),
    #[error("argmax tie at {0} location(s)")]
    TieDetected(usize),
    #[error("unsupported action: {0}")]
    UnsupportedAction(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("unknown name: {0}")]
    UnknownName(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
