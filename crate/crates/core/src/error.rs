use thiserror::Error;

/// Errors raised by the policy-search engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("divergence: {0}")]
    Divergence(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("replay buffer is empty")]
    EmptyBuffer,

    #[error("individual {index} has not been evaluated")]
    Unevaluated { index: usize },

    #[error("environment blow-up at step {step}: non-finite state")]
    EnvBlowUp { step: usize },

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("invalid value for `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("generation {generation}: {source}")]
    Generation {
        generation: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(key: &str, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn at_generation(self, generation: u64) -> Self {
        match self {
            e @ Error::Generation { .. } => e,
            e => Error::Generation {
                generation,
                source: Box::new(e),
            },
        }
    }

    /// True when the error reports numerical divergence (possibly wrapped in a
    /// generation context).
    pub fn is_divergence(&self) -> bool {
        match self {
            Error::Divergence(_) | Error::EnvBlowUp { .. } => true,
            Error::Generation { source, .. } => source.is_divergence(),
            _ => false,
        }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
