/// Failures surfaced to the operator, each with a stable exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Io(String),

    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<wmrft_core::Error> for CliError {
    fn from(e: wmrft_core::Error) -> Self {
        use wmrft_core::Error as E;
        let msg = e.to_string();
        match e {
            E::Shape(_) | E::Domain(_) | E::Config(_) => CliError::Config(msg),
            E::Io { .. } | E::Format(_) => CliError::Io(msg),
            E::Numeric(_) | E::Invariant(_) => CliError::Numeric(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
