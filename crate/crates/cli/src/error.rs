use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }

    pub(crate) fn io(context: impl std::fmt::Display, err: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{context}: {err}"))
    }
}

impl From<ffdga::Error> for CliError {
    fn from(e: ffdga::Error) -> Self {
        use ffdga::Error as E;
        match e {
            E::InvalidParam { .. } | E::PyramidTooDeep { .. } | E::Dimension(_) => CliError::Usage(e.to_string()),
            E::Io(_) | E::Csv(_) | E::Lattice(_) | E::Landmarks { .. } => CliError::Io(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
