//! Exhaustive search over order, lag and classifier parameters, scored by
//! stratified cross-validation inside the training data.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::{covariances, score_split, ClassifierError, ClassifierParams, PipelineKind, Result, ShrinkPolicy, SVM_PARAM_GRID};
use crate::covariance::{AugmentedParams, Epoch};
use crate::eval::{stratified_folds, Profiler};

/// Candidate orders, lags and classifier parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridDomain {
    pub orders: Vec<usize>,
    pub lags: Vec<usize>,
    /// Indexed by parameter id.
    pub classifiers: Vec<ClassifierParams>,
}

impl GridDomain {
    /// Sorts and deduplicates orders and lags.
    pub fn new(mut orders: Vec<usize>, mut lags: Vec<usize>, classifiers: Vec<ClassifierParams>) -> Result<Self> {
        orders.sort_unstable();
        orders.dedup();
        lags.sort_unstable();
        lags.dedup();
        if orders.is_empty() || lags.is_empty() || classifiers.is_empty() || orders[0] == 0 || lags[0] == 0 {
            return Err(ClassifierError::InvalidInput(
                "grid needs non-empty positive orders, lags and classifier parameters".into(),
            ));
        }
        Ok(GridDomain {
            orders,
            lags,
            classifiers,
        })
    }

    /// Classifier parameters searched for a pipeline kind.
    pub fn classifiers_for(kind: PipelineKind) -> Vec<ClassifierParams> {
        if kind.uses_svm() {
            SVM_PARAM_GRID.to_vec()
        } else {
            vec![ClassifierParams::Mdm]
        }
    }

    /// `order ∈ 1..=max_order`, `lag ∈ 1..=max_lag` for augmented kinds, the
    /// single plain cell otherwise.
    pub fn for_pipeline(kind: PipelineKind, max_order: usize, max_lag: usize) -> Result<Self> {
        let (orders, lags) = if kind.augmented() {
            ((1..=max_order).collect(), (1..=max_lag).collect())
        } else {
            (vec![1], vec![1])
        };
        Self::new(orders, lags, Self::classifiers_for(kind))
    }

    /// One order and lag, classifier parameters still searched.
    pub fn fixed(kind: PipelineKind, params: AugmentedParams) -> Result<Self> {
        Self::new(vec![params.order], vec![params.lag], Self::classifiers_for(kind))
    }

    pub fn len(&self) -> usize {
        self.orders.len() * self.lags.len() * self.classifiers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Cross-validated score of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCell {
    pub order: usize,
    pub lag: usize,
    pub param_id: usize,
    /// `None` when no fold could be scored.
    pub mean_score: Option<f64>,
    pub n_valid_folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSearchResult {
    pub params: AugmentedParams,
    pub param_id: usize,
    pub classifier: ClassifierParams,
    pub best_score: f64,
    /// Every cell in `(order, lag, param_id)` order.
    pub cells: Vec<GridCell>,
    /// Cells tied at the best score, in tie-break order; the first was
    /// chosen.
    pub ties: Vec<(usize, usize, usize)>,
}

impl GridSearchResult {
    /// Score map with columns `order,lag,param_id,mean_score,n_valid_folds`;
    /// unusable cells have an empty score.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "order,lag,param_id,mean_score,n_valid_folds")?;
        for c in &self.cells {
            let score = c.mean_score.map(|s| s.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{},{}", c.order, c.lag, c.param_id, score, c.n_valid_folds)?;
        }
        Ok(())
    }

    /// Best score over classifier parameters per `(order, lag)`, as
    /// `(orders, lags, rows)` with `rows[order_index][lag_index]`.
    pub fn order_lag_map(&self) -> (Vec<usize>, Vec<usize>, Vec<Vec<Option<f64>>>) {
        let mut orders: Vec<usize> = self.cells.iter().map(|c| c.order).collect();
        orders.dedup();
        let mut lags: Vec<usize> = self.cells.iter().map(|c| c.lag).collect();
        lags.sort_unstable();
        lags.dedup();
        let mut rows = vec![vec![None; lags.len()]; orders.len()];
        for c in &self.cells {
            let i = orders.binary_search(&c.order).expect("order present");
            let j = lags.binary_search(&c.lag).expect("lag present");
            if let Some(s) = c.mean_score {
                let slot: &mut Option<f64> = &mut rows[i][j];
                *slot = Some(slot.map_or(s, |v| v.max(s)));
            }
        }
        (orders, lags, rows)
    }
}

/// Scores of every classifier parameter for one `(order, lag)`:
/// `(mean over valid folds, valid fold count)`.
fn score_cell_group(
    epochs: &[&Epoch],
    labels: &[usize],
    n_classes: usize,
    params: AugmentedParams,
    domain: &GridDomain,
    folds: &[(Vec<usize>, Vec<usize>)],
    shrink: ShrinkPolicy,
) -> Vec<(Option<f64>, usize)> {
    let Ok(covs) = covariances(epochs, params, shrink) else {
        return vec![(None, 0); domain.classifiers.len()];
    };
    let quiet = Profiler::disabled();
    domain
        .classifiers
        .iter()
        .map(|cp| {
            let scores: Vec<f64> = folds
                .iter()
                .filter_map(|(train, test)| score_split(&covs, labels, train, test, n_classes, cp, &quiet).ok())
                .collect();
            if scores.is_empty() {
                (None, 0)
            } else {
                (Some(scores.iter().sum::<f64>() / scores.len() as f64), scores.len())
            }
        })
        .collect()
}

/// Nested grid search on training data only.
///
/// Cells with `(order − 1)·lag ≥ T` and cells whose every fold failed are
/// kept in the map without a score. All lags at order 1 describe the same
/// covariance and share one evaluation. Ties on the best score go to the
/// smaller order, then the smaller lag, then the smaller parameter id.
pub fn grid_search(
    epochs: &[&Epoch],
    labels: &[usize],
    n_classes: usize,
    domain: &GridDomain,
    inner_folds: usize,
    seed: u64,
    shrink: ShrinkPolicy,
) -> Result<GridSearchResult> {
    if epochs.len() != labels.len() || epochs.is_empty() {
        return Err(ClassifierError::InvalidInput(format!(
            "{} epochs but {} labels",
            epochs.len(),
            labels.len()
        )));
    }
    let counts = super::class_counts(labels, n_classes)?;
    if inner_folds < 2 {
        return Err(ClassifierError::InvalidInput("inner folds must be >= 2".into()));
    }
    if let Some((label, &count)) = counts.iter().enumerate().find(|(_, &c)| c < inner_folds) {
        return Err(ClassifierError::InvalidInput(format!(
            "class {label} has {count} training samples, fewer than {inner_folds} folds"
        )));
    }
    let samples = epochs[0].samples();
    let folds: Vec<(Vec<usize>, Vec<usize>)> = stratified_folds(labels, inner_folds, seed)
        .into_iter()
        .map(|test| {
            let mut in_test = vec![false; labels.len()];
            test.iter().for_each(|&i| in_test[i] = true);
            let train = (0..labels.len()).filter(|&i| !in_test[i]).collect();
            (train, test)
        })
        .collect();

    let mut keys: Vec<AugmentedParams> = Vec::new();
    for &order in &domain.orders {
        for &lag in &domain.lags {
            keys.push(AugmentedParams { order, lag });
        }
    }
    let distinct: Vec<AugmentedParams> = keys
        .iter()
        .copied()
        .filter(|k| k.fits(samples))
        .map(|k| if k.order == 1 { AugmentedParams::PLAIN } else { k })
        .fold(Vec::new(), |mut acc, k| {
            if !acc.contains(&k) {
                acc.push(k);
            }
            acc
        });
    let evaluated: Vec<Vec<(Option<f64>, usize)>> = distinct
        .par_iter()
        .map(|&k| score_cell_group(epochs, labels, n_classes, k, domain, &folds, shrink))
        .collect();

    let mut cells = Vec::with_capacity(domain.len());
    for k in &keys {
        let canonical = if k.order == 1 { AugmentedParams::PLAIN } else { *k };
        let group = k
            .fits(samples)
            .then(|| distinct.iter().position(|d| *d == canonical).map(|i| &evaluated[i]))
            .flatten();
        for param_id in 0..domain.classifiers.len() {
            let (mean_score, n_valid_folds) = group.map_or((None, 0), |g| g[param_id]);
            cells.push(GridCell {
                order: k.order,
                lag: k.lag,
                param_id,
                mean_score,
                n_valid_folds,
            });
        }
    }

    let mut best: Option<&GridCell> = None;
    for c in &cells {
        if let Some(s) = c.mean_score {
            if best.is_none_or(|b| s > b.mean_score.expect("scored")) {
                best = Some(c);
            }
        }
    }
    let best = best.ok_or(ClassifierError::AllCellsInvalid { samples })?;
    let best_score = best.mean_score.expect("scored");
    let ties = cells
        .iter()
        .filter(|c| c.mean_score == Some(best_score))
        .map(|c| (c.order, c.lag, c.param_id))
        .collect();
    Ok(GridSearchResult {
        params: AugmentedParams {
            order: best.order,
            lag: best.lag,
        },
        param_id: best.param_id,
        classifier: domain.classifiers[best.param_id],
        best_score,
        ties,
        cells,
    })
}
