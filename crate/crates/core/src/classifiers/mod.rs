//! Classification heads on covariance matrices and the hyper-parameter
//! search around them.
//!
//! Binary ranking scores are oriented so that larger values favor the
//! second class (label 1).

mod grid;
mod mdm;
mod pipeline;
mod svm;
mod tangent;

use thiserror::Error;

pub use grid::{grid_search, GridCell, GridDomain, GridSearchResult};
pub use mdm::{MdmModel, MdmPrediction};
pub use pipeline::{
    covariances, score_split, ClassifierParams, FittedHead, PipelineKind, ShrinkPolicy, SVM_PARAM_GRID,
};
pub use svm::{Kernel, SvmModel, SvmParams, SMO_TOLERANCE};
pub use tangent::{upper_triangle, TangentMap};

use crate::covariance::CovarianceError;
use crate::spd::SpdError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifierError {
    #[error("class {label} has no training samples")]
    EmptyClass { label: usize },
    #[error("need at least two classes, got {0}")]
    TooFewClasses(usize),
    #[error("invalid classifier input: {0}")]
    InvalidInput(String),
    #[error("SMO stopped after {iterations} iterations with KKT gap {kkt_gap:.3e}")]
    SolverStall { iterations: usize, kkt_gap: f64 },
    #[error("no grid cell is usable for epochs of {samples} samples")]
    AllCellsInvalid { samples: usize },
    #[error(transparent)]
    Spd(#[from] SpdError),
    #[error(transparent)]
    Covariance(#[from] CovarianceError),
}

pub type Result<T> = std::result::Result<T, ClassifierError>;

/// Checks labels against `n_classes` and returns the per-class counts.
pub(crate) fn class_counts(labels: &[usize], n_classes: usize) -> Result<Vec<usize>> {
    if n_classes < 2 {
        return Err(ClassifierError::TooFewClasses(n_classes));
    }
    let mut counts = vec![0; n_classes];
    for &l in labels {
        if l >= n_classes {
            return Err(ClassifierError::InvalidInput(format!(
                "label {l} out of range for {n_classes} classes"
            )));
        }
        counts[l] += 1;
    }
    Ok(counts)
}
