use std::path::PathBuf;

use thiserror::Error;

/// Errors reported by the model and its tooling.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's input contract.
    #[error("usage error: {0}")]
    Usage(String),

    /// A reduction-tree configuration does not describe a valid tree.
    #[error("configuration error: {0}")]
    Config(String),

    /// A format specification string could not be parsed or is out of range.
    #[error("format error: {0}")]
    Format(String),

    /// A value cannot be encoded in the requested format.
    #[error("value not representable: {0}")]
    Unrepresentable(String),

    /// A vector file line could not be parsed.
    #[error("{}line {line}: {msg}", .path.as_ref().map(|p| format!("{}: ", p.display())).unwrap_or_default())]
    Parse {
        path: Option<PathBuf>,
        line: usize,
        msg: String,
    },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
