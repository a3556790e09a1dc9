use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
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

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Solver(#[from] dfrelay_core::Error),

    #[error("sum rate is zero; energy per bit is undefined")]
    ZeroRate,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        use dfrelay_core::Error as Core;
        match self {
            Error::Io { .. } | Error::Csv(_) => 3,
            Error::Json { .. } | Error::Config(_) => 4,
            Error::Solver(Core::DimensionMismatch { .. } | Core::IndexOutOfRange { .. } | Core::InvalidInput { .. }) => 5,
            Error::Solver(_) | Error::ZeroRate => 6,
        }
    }
}
