use thiserror::Error;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Invalid(_) => 2,
            Self::Solver(_) => 3,
            Self::Io(_) => 4,
        }
    }

    pub fn class(&self) -> &'static str {
        match self {
            Self::Invalid(_) => "invalid-argument",
            Self::Solver(_) => "solver",
            Self::Io(_) => "io",
        }
    }
}

impl From<altruist::Error> for CliError {
    fn from(e: altruist::Error) -> Self {
        use altruist::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidArgument(_) => Self::Invalid(msg),
            E::Singular(_) | E::NoConvergence { .. } | E::DivisionByZero(_) => Self::Solver(msg),
            E::Io { .. } | E::Format { .. } => Self::Io(msg),
        }
    }
}
