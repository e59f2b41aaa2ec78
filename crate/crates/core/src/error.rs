use std::path::PathBuf;

use thiserror::Error;

use crate::lp::LpError;

pub type Result<T, E = McspError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum McspError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid generator configuration: {0}")]
    Config(String),

    #[error("malformed column: {0}")]
    MalformedColumn(String),

    #[error("instance too large for {what}: {detail}")]
    TooLarge { what: &'static str, detail: String },

    #[error(transparent)]
    Lp(#[from] LpError),

    #[error("no column for server {server} content {content} satisfies the current fixings")]
    UnfixablePool { server: usize, content: usize },

    #[error("column generation did not converge within {rounds} pricing rounds")]
    NonConvergence { rounds: usize },

    #[error("restricted master problem is infeasible: {0}")]
    InfeasibleMaster(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl McspError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        McspError::Io { path: path.into(), source }
    }
}
