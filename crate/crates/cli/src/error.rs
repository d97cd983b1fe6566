use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] statattr::Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot encode output: {0}")]
    Encode(String),
}

impl CliError {
    /// 2 for configuration and I/O problems, 3 for numeric-range failures,
    /// 4 when the requested basin fraction is out of reach.
    pub fn exit_code(&self) -> i32 {
        use statattr::Error as E;
        match self {
            CliError::Core(E::OrbitEscaped { .. } | E::CycleDepthOverflow) => 3,
            CliError::Core(E::AlphaUnreachable { .. }) => 4,
            _ => 2,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Encode(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Encode(e.to_string())
    }
}
