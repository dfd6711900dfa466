use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("could not place base station {placed} of {target} within {budget} proposals (lambda_bs * r_min^2 too dense)")]
    PackingFailure {
        placed: usize,
        target: usize,
        budget: usize,
    },

    #[error("numerical instability: {0}")]
    NumericalInstability(String),

    #[error("config error for key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("trial {trial}: {source}")]
    Trial {
        trial: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn config(key: &str, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn in_trial(self, trial: u64) -> Self {
        match self {
            e @ Error::Trial { .. } => e,
            e => Error::Trial {
                trial,
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, with trial metadata stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Trial { source, .. } => source.root(),
            e => e,
        }
    }
}
