use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("gridworld parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("linear system is singular: {0}")]
    Singular(String),
    #[error("successor model rows are not normalized (max deviation {0:e}); SR input looks unconverged")]
    Unnormalized(f64),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("non-finite entries in {0}")]
    NonFinite(&'static str),
    #[error("empty policy library")]
    EmptyLibrary,
    #[error("prior weights are all zero")]
    DegeneratePrior,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
