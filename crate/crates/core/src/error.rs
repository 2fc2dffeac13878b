use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read or write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported or corrupt file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("background region cannot host a single {patch_side}x{patch_side} patch")]
    InsufficientBackground { patch_side: usize },

    #[error(
        "matrix square root did not converge (residual {residual:.3e} after {iterations} iterations); \
         try an eigendecomposition-based square root"
    )]
    Convergence { iterations: usize, residual: f64 },

    #[error("inconsistent dataset: {0}")]
    Consistency(String),

    #[error("id sets differ; only in first: {only_first:?}; only in second: {only_second:?}")]
    IdMismatch {
        only_first: Vec<String>,
        only_second: Vec<String>,
    },

    #[error("{} referenced file(s) missing: {}", .0.len(), display_paths(.0))]
    MissingFiles(Vec<PathBuf>),

    #[error("cannot fill background: {0}")]
    CannotFill(String),
}

fn display_paths(paths: &[PathBuf]) -> String {
    paths
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by the content of the inputs rather than the
    /// filesystem or the configuration.
    pub fn is_degenerate_input(&self) -> bool {
        matches!(
            self,
            Error::Shape(_)
                | Error::Degenerate(_)
                | Error::InsufficientBackground { .. }
                | Error::CannotFill(_)
                | Error::Convergence { .. }
        )
    }
}
