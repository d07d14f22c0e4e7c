//! Evaluation protocols, metrics, timing and the statistical comparison of
//! pipelines.

mod folds;
mod meta;
mod metrics;
mod protocol;
mod stats;
mod timing;

use thiserror::Error;

pub use folds::{derive_seed, hash_str, stratified_folds};
pub use meta::{meta_analysis, DatasetTest, HypothesisResult, MetaAnalysis, MetaOptions, WILCOXON_MIN_SUBJECTS};
pub use metrics::{accuracy, auc_roc};
pub use protocol::{
    cross_session_eval, evaluate, within_session_eval, EvalKind, EvalOptions, EvalReport, Metric, ParamSource,
    PipelineSpec, PipelineSummary, SessionScore, SplitResult,
};
pub use stats::{
    bonferroni, cohen_d, permutation_paired_mean, permutation_paired_t, stouffer_combine, wilcoxon_signed_rank,
    wilcoxon_signed_rank_with, WilcoxonMethod, WILCOXON_EXACT_MAX, WILCOXON_MIN_PAIRS,
};
pub use timing::{timing_profile, Profiler, Stage, StageTimes};

use crate::classifiers::ClassifierError;
use crate::covariance::CovarianceError;
use crate::data::DataError;
use crate::embedding::EmbeddingError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("both classes must be present")]
    OneClassOnly,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("all paired differences are zero")]
    AllZeroDiffs,
    #[error("need at least {needed} pairs, got {got}")]
    TooFewPairs { needed: usize, got: usize },
    #[error("all paired differences are equal")]
    DegenerateVariance,
    #[error("p-value {0} is outside (0, 1)")]
    DegeneratePValue(f64),
    #[error("subject {subject}, session {session}: class {class} has {count} epochs, fewer than {folds} folds")]
    TooFewSamples {
        subject: String,
        session: String,
        class: usize,
        count: usize,
        folds: usize,
    },
    #[error("subject {subject} has a single session; cross-session evaluation needs at least two")]
    SingleSession { subject: String },
    #[error("reports are not paired: {0}")]
    PairingViolation(String),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Covariance(#[from] CovarianceError),
}

pub type Result<T> = std::result::Result<T, EvalError>;
