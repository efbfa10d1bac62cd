use std::path::PathBuf;

use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] srlrtr::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Cube {
        path: PathBuf,
        #[source]
        source: srlrtr::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 0 success, 1 usage or invalid input, 2 I/O, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io { .. } | CliError::Json { .. } | CliError::Csv { .. } => 2,
            CliError::Core(e) | CliError::Cube { source: e, .. } => core_code(e),
        }
    }
}

fn core_code(e: &srlrtr::Error) -> i32 {
    use srlrtr::Error as E;
    match e {
        E::Shape { .. } | E::InvalidParameter { .. } => 1,
        E::NonFinite { .. } | E::Numeric { .. } | E::ZeroBandMean { .. } => 3,
        E::NpyFormat { .. } | E::NpyDtype(_) | E::NpyRank(_) | E::NpyPayload { .. } | E::Io(_) => 2,
    }
}
