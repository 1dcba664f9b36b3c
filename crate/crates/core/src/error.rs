use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter domain: {0}")]
    Domain(String),

    #[error("parameter {theta:?} outside admissible range: {reason}")]
    ParamOutOfRange { theta: Vec<f64>, reason: String },

    #[error("point outside model support: {0}")]
    Support(String),

    #[error("cannot condition on x = {x}: marginal density is zero")]
    Conditioning { x: f64 },

    #[error("degenerate posterior: {0}")]
    DegeneratePosterior(String),

    #[error("singular matrix (|det| = {det:e})")]
    Singular { det: f64 },

    #[error("matrix is not symmetric (max deviation {deviation:e})")]
    Asymmetric { deviation: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cell {cell} failed: {source}")]
    Cell {
        cell: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv parse error at line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Conditioning { .. } | Error::DegeneratePosterior(_) | Error::Singular { .. } => true,
            Error::Cell { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
