use thiserror::Error;

use crate::prob::AxisName;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("axis {0} is not present in the distribution")]
    UnknownAxis(AxisName),

    #[error("axis {0} appears more than once")]
    DuplicateAxis(AxisName),

    #[error("axis sets overlap on {0}")]
    OverlappingAxes(AxisName),

    #[error("axis set must not be empty")]
    EmptyAxisSet,

    #[error("axis {0} has size zero")]
    EmptyAlphabet(AxisName),

    #[error("probability {value} is outside [0, 1] ({context})")]
    InvalidProbability { value: f64, context: String },

    #[error("{context}: entries sum to {sum}, expected 1")]
    NotNormalized { sum: f64, context: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("size guard exceeded: {0}")]
    Guard(String),

    #[error("joint distribution is not of the channel form: {0}")]
    NotChannelForm(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("spec file field `{field}`{}: {message}", index.as_ref().map(|i| format!(" at {i}")).unwrap_or_default())]
    Parse {
        field: String,
        index: Option<String>,
        message: String,
    },
}

impl Error {
    pub(crate) fn parse(field: &str, index: Option<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            field: field.to_string(),
            index,
            message: message.into(),
        }
    }
}
