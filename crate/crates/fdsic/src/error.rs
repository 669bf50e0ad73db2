use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("singular system: column {column} is linearly dependent on earlier columns")]
    Singular { column: usize },
    #[error("underdetermined system: {0}")]
    Underdetermined(String),
    #[error("cannot identify {0}")]
    Unidentifiable(String),
    #[error("allocation mismatch: {0}")]
    Mismatch(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("ray {index}: {msg}")]
    InvalidRay { index: usize, msg: String },
    #[error("no rays")]
    NoRays,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
