use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("non-manifold edge ({0}, {1}) bounds {2} triangles")]
    NonManifold(usize, usize, usize),
    #[error("triangles on edge ({0}, {1}) induce the same orientation")]
    Orientation(usize, usize),
    #[error("surface is not orientable")]
    NonOrientable,
    #[error("budget exceeded: {placed} copies placed, limit {limit}")]
    BudgetExceeded { placed: usize, limit: usize },
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
