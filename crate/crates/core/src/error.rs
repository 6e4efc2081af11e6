use thiserror::Error;

use crate::engine::SteadyStateCertificate;
use crate::linalg::ComplexMatrix;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("step size {dt} violates dt*||L|| <= 0.1 (||L|| = {norm:.6e}); use dt <= {suggested:.6e}")]
    StepSize { dt: f64, norm: f64, suggested: f64 },

    #[error("steady state is not unique: {} stationary directions", certificate.null_count)]
    NonUniqueSteadyState {
        basis: Vec<ComplexMatrix>,
        certificate: SteadyStateCertificate,
    },

    #[error("config error{}: {message}", location(*line, key.as_deref()))]
    Config {
        line: Option<usize>,
        key: Option<String>,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn location(line: Option<usize>, key: Option<&str>) -> String {
    match (line, key) {
        (Some(l), Some(k)) => format!(" at line {l} (key `{k}`)"),
        (Some(l), None) => format!(" at line {l}"),
        (None, Some(k)) => format!(" (key `{k}`)"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::Config {
            line: None,
            key: None,
            message: message.into(),
        }
    }

    pub(crate) fn config_at(line: usize, key: &str, message: impl Into<String>) -> Self {
        Error::Config {
            line: Some(line),
            key: Some(key.to_string()),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    ///
    /// 0 is success; 2 configuration, 3 numerical, 4 non-unique steady state
    /// where uniqueness was required. I/O failures share code 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Domain(_) => 2,
            Error::Dimension(_) | Error::Numerical(_) | Error::StepSize { .. } => 3,
            Error::NonUniqueSteadyState { .. } => 4,
            Error::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
