use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        offset: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("conjugate undefined on the requested window: maximizer escapes for z = {z}")]
    ConjugateUndefined { z: f64 },

    #[error("compatibility condition violated: minimizer for t = {t}, x = {x:?} left the search window after {expansions} expansions")]
    WindowEscape { t: f64, x: Vec<f64>, expansions: usize },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid characteristic datum: {0}")]
    InvalidDatum(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::InvalidInput(_) | Error::Io { .. } | Error::Unsupported(_) => 1,
            Error::Hypothesis(_) | Error::NotApplicable(_) | Error::InvalidDatum(_) | Error::OutOfRange(_) => 2,
            Error::ConjugateUndefined { .. }
            | Error::WindowEscape { .. }
            | Error::InvariantViolation(_)
            | Error::Numerical(_) => 3,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
