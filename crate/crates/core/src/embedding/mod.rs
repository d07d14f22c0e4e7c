//! Delay-embedding parameter estimators.
//!
//! The estimators are univariate; for an epoch set they run on every channel
//! of every epoch and the per-series curves are accumulated in a fixed order
//! before the extremum is picked, so results are deterministic and do not
//! depend on the thread count.

mod ami;
mod cao;
mod mdop;

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

pub use ami::{average_mutual_information, first_local_minimum, select_tau_ami, TauEstimate};
pub use cao::{cao_e1_curve, cao_embedding_dimension, CaoEstimate};
pub use mdop::{mdop_unified, mdop_with, MdopConfig, MdopCycle, MdopEstimate};

use crate::data::EpochSet;

/// Default number of histogram bins per axis for mutual information.
pub const DEFAULT_BINS: usize = 16;
/// Default tolerance for `|E1 − 1|` in Cao's method.
pub const DEFAULT_CAO_THRESHOLD: f64 = 0.05;
/// Default largest lag scanned by the estimators.
pub const DEFAULT_MAX_LAG: usize = 10;
/// Default largest embedding dimension scanned by Cao's method.
pub const DEFAULT_MAX_DIM: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbeddingError {
    #[error("series is constant")]
    ConstantSeries,
    #[error("series too short: need more than {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("invalid estimator configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, EmbeddingError>;

/// Every channel of every epoch as a separate series, in session order.
pub(crate) fn series_of(set: &EpochSet) -> Vec<Vec<f64>> {
    set.epochs()
        .flat_map(|e| (0..e.channels()).map(move |c| e.channel(c)))
        .collect()
}

pub(crate) fn range_of(series: &[f64]) -> f64 {
    let (lo, hi) = series
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo
}

/// Points closer than this fraction of the series range count as repeats of
/// the same state and are never taken as neighbors.
pub(crate) const DUPLICATE_TOL: f64 = 1e-9;

/// Which estimator produced an [`EmbeddingEstimate`], with its curves.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Diagnostics {
    AmiCao {
        ami: Vec<f64>,
        ami_local_minimum: bool,
        e1: Vec<f64>,
        cao_saturation_failed: bool,
    },
    Mdop {
        cycles: Vec<MdopCycle>,
        terminated: bool,
    },
}

/// Lag `τ` and embedding dimension `D`, identified with the lag and order of
/// the augmented covariance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingEstimate {
    pub tau: usize,
    pub dim: usize,
    pub diagnostics: Diagnostics,
}

impl EmbeddingEstimate {
    /// True when no estimator fell back to a default or hit its cap.
    pub fn is_clean(&self) -> bool {
        match &self.diagnostics {
            Diagnostics::AmiCao {
                ami_local_minimum,
                cao_saturation_failed,
                ..
            } => *ami_local_minimum && !cao_saturation_failed,
            Diagnostics::Mdop { terminated, .. } => *terminated,
        }
    }
}

/// Configuration of the AMI + Cao route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmiCaoConfig {
    pub max_lag: usize,
    pub bins: usize,
    pub max_dim: usize,
    pub threshold: f64,
}

impl Default for AmiCaoConfig {
    fn default() -> Self {
        AmiCaoConfig {
            max_lag: DEFAULT_MAX_LAG,
            bins: DEFAULT_BINS,
            max_dim: DEFAULT_MAX_DIM,
            threshold: DEFAULT_CAO_THRESHOLD,
        }
    }
}

/// `τ` from the first minimum of the accumulated AMI, then `D` from Cao's
/// method at that `τ`.
pub fn estimate_ami_cao(set: &EpochSet, config: &AmiCaoConfig) -> Result<EmbeddingEstimate> {
    let tau = select_tau_ami(set, config.max_lag, config.bins)?;
    let cao = cao_embedding_dimension(set, tau.tau, config.max_dim, config.threshold)?;
    Ok(EmbeddingEstimate {
        tau: tau.tau,
        dim: cao.dim,
        diagnostics: Diagnostics::AmiCao {
            ami: tau.curve,
            ami_local_minimum: tau.local_minimum,
            e1: cao.e1,
            cao_saturation_failed: cao.saturation_failed,
        },
    })
}

/// `τ` and `D` from the unified MDOP estimator.
pub fn estimate_mdop(set: &EpochSet, config: &MdopConfig) -> Result<EmbeddingEstimate> {
    let est = mdop_with(set, config)?;
    Ok(EmbeddingEstimate {
        tau: est.tau,
        dim: est.dim,
        diagnostics: Diagnostics::Mdop {
            cycles: est.cycles,
            terminated: est.terminated,
        },
    })
}

/// Writes `header` and one `index,value` row per curve point, with indices
/// starting at `first_index`.
pub fn write_curve_csv<W: Write>(
    mut w: W,
    header: &str,
    first_index: usize,
    values: &[f64],
) -> std::io::Result<()> {
    writeln!(w, "{header}")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(w, "{},{}", first_index + i, v)?;
    }
    Ok(())
}
