use thiserror::Error;

/// Errors raised by the library.
///
/// `Argument` covers malformed calls (shape mismatches, invalid modes);
/// `Config` covers scenarios that cannot be simulated or estimated, such as
/// a violated identifiability inequality or an unsupported pilot length.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    At {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Wraps the error with a location such as a sweep point.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::At {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True when the root cause is a configuration problem.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) => true,
            Error::Argument(_) => false,
            Error::At { source, .. } => source.is_config(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
