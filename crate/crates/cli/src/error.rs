use thiserror::Error;

/// Process exit codes.
pub const EXIT_PASS: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or out-of-range configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A certification or verification check failed.
    #[error("{0}")]
    Failed(String),

    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: quotient_landscape::Error,
    },
}

impl CliError {
    pub fn core(context: impl Into<String>) -> impl FnOnce(quotient_landscape::Error) -> Self {
        let context = context.into();
        move |source| CliError::Core { context, source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_USAGE,
            CliError::Failed(_) => EXIT_FAIL,
            CliError::Core { source, .. } if source.is_numerical() => EXIT_NUMERICAL,
            CliError::Core { .. } => EXIT_USAGE,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core {
            context: "i/o".into(),
            source: e.into(),
        }
    }
}
