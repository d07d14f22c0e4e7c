use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ClassifierError, Kernel, MdmModel, Result, SvmModel, SvmParams, TangentMap};
use crate::covariance::{augmented_covariance, AugmentedParams, Epoch};
use crate::eval::{accuracy, auc_roc, Profiler, Stage};
use crate::spd::SpdMatrix;

/// The four pipelines compared throughout: plain or augmented covariance,
/// classified by MDM or by a tangent-space SVM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PipelineKind {
    #[serde(rename = "MDM")]
    Mdm,
    #[serde(rename = "ACM+MDM")]
    AcmMdm,
    #[serde(rename = "TANG+SVM")]
    TangSvm,
    #[serde(rename = "ACM+TANG+SVM")]
    AcmTangSvm,
}

impl PipelineKind {
    pub const ALL: [PipelineKind; 4] = [
        PipelineKind::Mdm,
        PipelineKind::AcmMdm,
        PipelineKind::TangSvm,
        PipelineKind::AcmTangSvm,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PipelineKind::Mdm => "MDM",
            PipelineKind::AcmMdm => "ACM+MDM",
            PipelineKind::TangSvm => "TANG+SVM",
            PipelineKind::AcmTangSvm => "ACM+TANG+SVM",
        }
    }

    /// Whether the covariance is augmented (order and lag are free).
    pub fn augmented(&self) -> bool {
        matches!(self, PipelineKind::AcmMdm | PipelineKind::AcmTangSvm)
    }

    pub fn uses_svm(&self) -> bool {
        matches!(self, PipelineKind::TangSvm | PipelineKind::AcmTangSvm)
    }

    /// The same classifier on the plain covariance.
    pub fn plain(&self) -> PipelineKind {
        if self.uses_svm() {
            PipelineKind::TangSvm
        } else {
            PipelineKind::Mdm
        }
    }
}

impl fmt::Display for PipelineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PipelineKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let key = s.trim().to_ascii_uppercase().replace(['-', '_'], "+");
        PipelineKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| format!("unknown pipeline {s:?} (expected MDM, ACM+MDM, TANG+SVM or ACM+TANG+SVM)"))
    }
}

/// When Ledoit-Wolf shrinkage is applied to the covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShrinkPolicy {
    /// Only for augmented covariances (order > 1).
    #[default]
    Auto,
    Always,
    Never,
}

impl ShrinkPolicy {
    pub fn applies(&self, order: usize) -> bool {
        match self {
            ShrinkPolicy::Auto => order > 1,
            ShrinkPolicy::Always => true,
            ShrinkPolicy::Never => false,
        }
    }
}

/// Classifier head configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "head", rename_all = "lowercase")]
pub enum ClassifierParams {
    Mdm,
    Svm(SvmParams),
}

impl fmt::Display for ClassifierParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassifierParams::Mdm => f.write_str("mdm"),
            ClassifierParams::Svm(p) => match p.gamma {
                Some(g) => write!(f, "svm(C={}, {}, gamma={g})", p.c, p.kernel.name()),
                None => write!(f, "svm(C={}, {})", p.c, p.kernel.name()),
            },
        }
    }
}

const fn svm(c: f64, kernel: Kernel) -> ClassifierParams {
    ClassifierParams::Svm(SvmParams { c, kernel, gamma: None })
}

/// SVM grid `C ∈ {0.5, 1, 1.5} × kernel ∈ {linear, rbf}`, C-major; the index
/// is the parameter id used in score maps and tie-breaks.
pub const SVM_PARAM_GRID: [ClassifierParams; 6] = [
    svm(0.5, Kernel::Linear),
    svm(0.5, Kernel::Rbf),
    svm(1.0, Kernel::Linear),
    svm(1.0, Kernel::Rbf),
    svm(1.5, Kernel::Linear),
    svm(1.5, Kernel::Rbf),
];

/// Covariance of every epoch, in input order.
pub fn covariances(epochs: &[&Epoch], params: AugmentedParams, shrink: ShrinkPolicy) -> Result<Vec<SpdMatrix>> {
    let shrink = shrink.applies(params.order);
    epochs
        .par_iter()
        .map(|e| augmented_covariance(e, params, shrink).map_err(ClassifierError::from))
        .collect()
}

/// A trained classifier head.
#[derive(Debug, Clone)]
pub enum FittedHead {
    Mdm(MdmModel),
    Svm { map: TangentMap, model: SvmModel },
}

impl FittedHead {
    pub fn fit(covs: &[SpdMatrix], labels: &[usize], n_classes: usize, params: &ClassifierParams) -> Result<Self> {
        match params {
            ClassifierParams::Mdm => Ok(FittedHead::Mdm(MdmModel::fit(covs, labels, n_classes)?)),
            ClassifierParams::Svm(p) => {
                if covs.is_empty() {
                    return Err(ClassifierError::InvalidInput("no training covariances".into()));
                }
                let map = TangentMap::fit(covs)?;
                let features = covs.iter().map(|c| map.transform(c)).collect::<Result<Vec<_>>>()?;
                let model = SvmModel::fit(&features, labels, n_classes, p)?;
                Ok(FittedHead::Svm { map, model })
            }
        }
    }

    pub fn predict(&self, cov: &SpdMatrix) -> Result<usize> {
        match self {
            FittedHead::Mdm(m) => Ok(m.predict(cov)?.label),
            FittedHead::Svm { map, model } => model.predict(&map.transform(cov)?),
        }
    }

    /// Binary ranking score, larger for label 1.
    pub fn score(&self, cov: &SpdMatrix) -> Result<f64> {
        match self {
            FittedHead::Mdm(m) => m.score(cov),
            FittedHead::Svm { map, model } => model.score(&map.transform(cov)?),
        }
    }
}

/// Trains on `train` and scores `test` (indices into `covs`): AUC of the
/// ranking score for two classes, accuracy otherwise.
pub fn score_split(
    covs: &[SpdMatrix],
    labels: &[usize],
    train: &[usize],
    test: &[usize],
    n_classes: usize,
    params: &ClassifierParams,
    profiler: &Profiler,
) -> Result<f64> {
    let train_covs: Vec<SpdMatrix> = train.iter().map(|&i| covs[i].clone()).collect();
    let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let head = profiler.stage(Stage::Fit, || FittedHead::fit(&train_covs, &train_labels, n_classes, params))?;
    let truth: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
    profiler.stage(Stage::Predict, || {
        if n_classes == 2 {
            let scores = test.iter().map(|&i| head.score(&covs[i])).collect::<Result<Vec<_>>>()?;
            auc_roc(&scores, &truth).map_err(|e| ClassifierError::InvalidInput(e.to_string()))
        } else {
            let pred = test.iter().map(|&i| head.predict(&covs[i])).collect::<Result<Vec<_>>>()?;
            accuracy(&pred, &truth).map_err(|e| ClassifierError::InvalidInput(e.to_string()))
        }
    })
}
