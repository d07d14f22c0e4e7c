//! Mapping of library errors to exit codes and the JSON error line.

use serde::Serialize;

use crate::classifiers::ClassifierError;
use crate::covariance::CovarianceError;
use crate::data::DataError;
use crate::embedding::EmbeddingError;
use crate::eval::EvalError;
use crate::spd::SpdError;

pub const EXIT_USER: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// A failed command: exit code, error kind and message.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    #[serde(rename = "error")]
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    pub fn user(kind: &str, message: impl Into<String>) -> Self {
        CliError {
            kind: kind.into(),
            message: message.into(),
            exit_code: EXIT_USER,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("error serializes")
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

/// Name of the outermost enum variant in a `Debug` rendering.
fn variant<T: std::fmt::Debug>(e: &T) -> String {
    format!("{e:?}").chars().take_while(|c| c.is_alphanumeric() || *c == '_').collect()
}

fn spd(e: &SpdError) -> (i32, String) {
    let code = match e {
        SpdError::DimensionMismatch { .. } | SpdError::NotSquare { .. } | SpdError::EmptyInput => EXIT_USER,
        _ => EXIT_NUMERICAL,
    };
    (code, variant(e))
}

fn covariance(e: &CovarianceError) -> (i32, String) {
    match e {
        CovarianceError::NotSpd(inner) => (EXIT_NUMERICAL, format!("NotSpd.{}", variant(inner))),
        CovarianceError::SingularSystem { .. } => (EXIT_NUMERICAL, variant(e)),
        _ => (EXIT_USER, variant(e)),
    }
}

fn classifier(e: &ClassifierError) -> (i32, String) {
    match e {
        ClassifierError::Spd(inner) => spd(inner),
        ClassifierError::Covariance(inner) => covariance(inner),
        ClassifierError::SolverStall { .. } => (EXIT_NUMERICAL, variant(e)),
        _ => (EXIT_USER, variant(e)),
    }
}

fn data(e: &DataError) -> (i32, String) {
    match e {
        DataError::Epoch(inner) => covariance(inner),
        DataError::Format { .. } => (EXIT_USER, "FormatError".into()),
        _ => (EXIT_USER, variant(e)),
    }
}

fn eval(e: &EvalError) -> (i32, String) {
    match e {
        EvalError::Classifier(inner) => classifier(inner),
        EvalError::Embedding(inner) => (EXIT_USER, variant(inner)),
        EvalError::Data(inner) => data(inner),
        EvalError::Covariance(inner) => covariance(inner),
        EvalError::DegenerateVariance | EvalError::DegeneratePValue(_) | EvalError::AllZeroDiffs => {
            (EXIT_NUMERICAL, variant(e))
        }
        _ => (EXIT_USER, variant(e)),
    }
}

macro_rules! from_error {
    ($ty:ty, $f:ident) => {
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                let (exit_code, kind) = $f(&e);
                CliError {
                    kind,
                    message: e.to_string(),
                    exit_code,
                }
            }
        }
    };
}

from_error!(SpdError, spd);
from_error!(CovarianceError, covariance);
from_error!(ClassifierError, classifier);
from_error!(DataError, data);
from_error!(EvalError, eval);

impl From<EmbeddingError> for CliError {
    fn from(e: EmbeddingError) -> Self {
        CliError::user(&variant(&e), e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::user("Io", e.to_string())
    }
}
