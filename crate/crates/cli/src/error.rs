use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_DEGENERATE: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: ifs_core::Error,
    },

    #[error(transparent)]
    Core(#[from] ifs_core::Error),

    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::File { source, .. } | CliError::Core(source) => core_exit_code(source),
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

fn core_exit_code(err: &ifs_core::Error) -> i32 {
    use ifs_core::Error::*;
    match err {
        DimensionMismatch { .. }
        | EmptyCloud
        | NonFinite
        | ZeroDimension
        | InvalidParameter(_)
        | Parse { .. }
        | RaggedRow { .. }
        | NotSquare { .. }
        | MapCount { .. }
        | Io(_) => EXIT_CONFIG,
        TrivialProjection => EXIT_DEGENERATE,
        _ => EXIT_NUMERIC,
    }
}

impl CliError {
    pub fn is_broken_pipe(&self) -> bool {
        matches!(self, CliError::Core(ifs_core::Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe)
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Core(err.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;
