use plap_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("solver did not converge: {0}")]
    NotConverged(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::NotConverged(_) => 3,
            CliError::Invariant(_) => 4,
            CliError::Io(_) => 5,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::LinearSolver(_) | Error::NonFiniteWeight { .. } => CliError::NotConverged(e.to_string()),
            Error::UndefinedFrequency { .. } | Error::ZeroDenominator(_) => CliError::Invariant(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
