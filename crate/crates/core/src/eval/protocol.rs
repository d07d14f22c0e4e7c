//! Within-session k-fold and cross-session leave-one-session-out
//! evaluation of one or more pipelines over a set of subjects.
//!
//! Fold assignments and inner grid-search folds depend only on the seed,
//! subject and split, so every pipeline sees the same splits. Splits run in
//! parallel and are collected in a fixed order; reports are byte-identical
//! for any thread count.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, hash_str, stratified_folds, EvalError, Profiler, Result, Stage, StageTimes};
use crate::classifiers::{
    covariances, grid_search, score_split, ClassifierParams, GridDomain, GridSearchResult, PipelineKind,
    ShrinkPolicy,
};
use crate::covariance::{AugmentedParams, Epoch};
use crate::data::EpochSet;
use crate::embedding::{estimate_ami_cao, mdop_with, AmiCaoConfig, MdopConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalKind {
    /// Within-session k-fold cross-validation.
    Ws,
    /// Leave-one-session-out.
    Cs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Auc,
    Accuracy,
}

/// Where the order and lag of an augmented pipeline come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ParamSource {
    /// Nested grid search on the training data.
    Grid,
    /// Lag from mutual information, order from Cao's method.
    AmiCao,
    /// Both from the unified MDOP estimator.
    Mdop,
    Fixed { order: usize, lag: usize },
}

impl fmt::Display for ParamSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamSource::Grid => f.write_str("grid"),
            ParamSource::AmiCao => f.write_str("ami_cao"),
            ParamSource::Mdop => f.write_str("mdop"),
            ParamSource::Fixed { order, lag } => write!(f, "fixed({order},{lag})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub kind: PipelineKind,
    /// Ignored by plain pipelines.
    pub param_source: ParamSource,
}

impl PipelineSpec {
    pub fn new(kind: PipelineKind, param_source: ParamSource) -> Self {
        PipelineSpec { kind, param_source }
    }

    /// `kind` with grid-searched parameters.
    pub fn grid(kind: PipelineKind) -> Self {
        Self::new(kind, ParamSource::Grid)
    }

    /// Name used in reports: the kind, plus the parameter source for
    /// augmented pipelines.
    pub fn label(&self) -> String {
        if self.kind.augmented() {
            format!("{} [{}]", self.kind, self.param_source)
        } else {
            self.kind.name().to_string()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub dataset: String,
    /// Outer folds of within-session evaluation.
    pub folds: usize,
    /// Folds of the nested grid search.
    pub inner_folds: usize,
    pub seed: u64,
    pub grid_max_order: usize,
    pub grid_max_lag: usize,
    pub shrink: ShrinkPolicy,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            dataset: "dataset".into(),
            folds: 5,
            inner_folds: 5,
            seed: 0,
            grid_max_order: 10,
            grid_max_lag: 10,
            shrink: ShrinkPolicy::Auto,
        }
    }
}

/// Score of one pipeline on one train/test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub subject: String,
    pub pipeline: String,
    pub session: String,
    /// `fold<k>` within a session, or the held-out session id.
    pub split: String,
    pub score: f64,
    pub order: usize,
    pub lag: usize,
    pub classifier: ClassifierParams,
    #[serde(skip)]
    pub timing: StageTimes,
    #[serde(skip)]
    pub grid: Option<GridSearchResult>,
}

/// Mean split score per subject, pipeline and session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionScore {
    pub subject: String,
    pub pipeline: String,
    pub session: String,
    pub score: f64,
    pub n_splits: usize,
}

/// Mean and sample standard deviation over subjects, each subject scored by
/// the mean over its sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub pipeline: String,
    pub mean: f64,
    pub std: f64,
    pub n_subjects: usize,
}

/// Evaluation outcome. The JSON form omits timings and grid maps so that it
/// is a pure function of inputs and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub evaluation: EvalKind,
    pub metric: Metric,
    pub seed: u64,
    /// Outer folds for within-session evaluation.
    pub folds: Option<usize>,
    pub pipelines: Vec<String>,
    pub subjects: Vec<String>,
    pub splits: Vec<SplitResult>,
    pub sessions: Vec<SessionScore>,
    pub summary: Vec<PipelineSummary>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| EvalError::InvalidInput(format!("report JSON: {e}")))
    }

    /// Per-subject score of `pipeline` (mean over sessions), in subject order;
    /// `None` when the pipeline is absent.
    pub fn subject_scores(&self, pipeline: &str) -> Option<Vec<(String, f64)>> {
        if !self.pipelines.iter().any(|p| p == pipeline) {
            return None;
        }
        Some(
            self.subjects
                .iter()
                .filter_map(|subject| {
                    let s: Vec<f64> = self
                        .sessions
                        .iter()
                        .filter(|r| r.pipeline == pipeline && &r.subject == subject)
                        .map(|r| r.score)
                        .collect();
                    (!s.is_empty()).then(|| (subject.clone(), s.iter().sum::<f64>() / s.len() as f64))
                })
                .collect(),
        )
    }

    /// Session keys `(subject, session)` evaluated for `pipeline`.
    pub fn session_keys(&self, pipeline: &str) -> Vec<(String, String)> {
        self.sessions
            .iter()
            .filter(|r| r.pipeline == pipeline)
            .map(|r| (r.subject.clone(), r.session.clone()))
            .collect()
    }

    /// One row per split.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "subject,session,split,pipeline,score,order,lag,classifier")?;
        for r in &self.splits {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                csv_field(&r.subject),
                csv_field(&r.session),
                csv_field(&r.split),
                csv_field(&r.pipeline),
                r.score,
                r.order,
                r.lag,
                csv_field(&r.classifier.to_string())
            )?;
        }
        Ok(())
    }

    /// Stage wall times (seconds) per split.
    pub fn write_timing_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "subject,session,split,pipeline,order,lag,estimation,grid_search,covariance,fit,predict,total")?;
        for r in &self.splits {
            let t = &r.timing;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                csv_field(&r.subject),
                csv_field(&r.session),
                csv_field(&r.split),
                csv_field(&r.pipeline),
                r.order,
                r.lag,
                t.estimation,
                t.grid_search,
                t.covariance,
                t.fit,
                t.predict,
                t.total()
            )?;
        }
        Ok(())
    }

    /// Stage times summed over the splits of each pipeline.
    pub fn timing_by_pipeline(&self) -> Vec<(String, StageTimes)> {
        self.pipelines
            .iter()
            .map(|p| {
                let mut total = StageTimes::default();
                self.splits.iter().filter(|r| &r.pipeline == p).for_each(|r| total.add(&r.timing));
                (p.clone(), total)
            })
            .collect()
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One train/test split of one subject, shared by every pipeline.
struct Task {
    subject: usize,
    session: String,
    split: String,
    /// Indices into the subject's epochs in session order.
    train: Vec<usize>,
    test: Vec<usize>,
    inner_seed: u64,
}

struct Subject<'a> {
    set: &'a EpochSet,
    epochs: Vec<&'a Epoch>,
    labels: Vec<usize>,
}

fn check_inputs(subjects: &[EpochSet], pipelines: &[PipelineSpec], opts: &EvalOptions) -> Result<usize> {
    let first = subjects
        .first()
        .ok_or_else(|| EvalError::InvalidInput("no subjects".into()))?;
    if pipelines.is_empty() {
        return Err(EvalError::InvalidInput("no pipelines".into()));
    }
    let n_classes = first.n_classes();
    if n_classes < 2 {
        return Err(EvalError::InvalidInput("need at least two classes".into()));
    }
    for (i, s) in subjects.iter().enumerate() {
        if s.class_names() != first.class_names() {
            return Err(EvalError::InvalidInput(format!(
                "subject {} has classes {:?}, expected {:?}",
                s.subject(),
                s.class_names(),
                first.class_names()
            )));
        }
        if subjects[..i].iter().any(|o| o.subject() == s.subject()) {
            return Err(EvalError::InvalidInput(format!("duplicate subject {}", s.subject())));
        }
    }
    let mut labels: Vec<String> = pipelines.iter().map(|p| p.label()).collect();
    labels.sort();
    if labels.windows(2).any(|w| w[0] == w[1]) {
        return Err(EvalError::InvalidInput("duplicate pipeline".into()));
    }
    if opts.folds < 2 || opts.inner_folds < 2 {
        return Err(EvalError::InvalidInput("folds must be >= 2".into()));
    }
    if let ParamSource::Fixed { order, lag } = pipelines
        .iter()
        .map(|p| p.param_source)
        .find(|s| matches!(s, ParamSource::Fixed { .. }))
        .unwrap_or(ParamSource::Grid)
    {
        AugmentedParams::new(order, lag)?;
    }
    if opts.grid_max_order == 0 || opts.grid_max_lag == 0 {
        return Err(EvalError::InvalidInput("grid bounds must be >= 1".into()));
    }
    Ok(n_classes)
}

/// Order, lag and classifier of one split, from the pipeline's source.
fn select_params(
    spec: &PipelineSpec,
    subject: &Subject,
    task: &Task,
    n_classes: usize,
    opts: &EvalOptions,
    profiler: &Profiler,
) -> Result<(AugmentedParams, ClassifierParams, Option<GridSearchResult>)> {
    let kind = spec.kind;
    let train_epochs: Vec<&Epoch> = task.train.iter().map(|&i| subject.epochs[i]).collect();
    let train_labels: Vec<usize> = task.train.iter().map(|&i| subject.labels[i]).collect();
    let search = |domain: GridDomain| {
        profiler.stage(Stage::GridSearch, || {
            grid_search(
                &train_epochs,
                &train_labels,
                n_classes,
                &domain,
                opts.inner_folds,
                task.inner_seed,
                opts.shrink,
            )
        })
    };
    let params = if !kind.augmented() {
        AugmentedParams::PLAIN
    } else {
        match spec.param_source {
            ParamSource::Grid => {
                let g = search(GridDomain::for_pipeline(kind, opts.grid_max_order, opts.grid_max_lag)?)?;
                return Ok((g.params, g.classifier, Some(g)));
            }
            ParamSource::AmiCao => {
                let train = subject.set.select(&task.train)?;
                let est = profiler.stage(Stage::Estimation, || estimate_ami_cao(&train, &AmiCaoConfig::default()))?;
                AugmentedParams::new(est.dim, est.tau)?
            }
            ParamSource::Mdop => {
                let train = subject.set.select(&task.train)?;
                let est = profiler.stage(Stage::Estimation, || mdop_with(&train, &MdopConfig::default()))?;
                AugmentedParams::new(est.dim, est.tau)?
            }
            ParamSource::Fixed { order, lag } => AugmentedParams::new(order, lag)?,
        }
    };
    if kind.uses_svm() {
        let g = search(GridDomain::fixed(kind, params)?)?;
        Ok((params, g.classifier, Some(g)))
    } else {
        Ok((params, ClassifierParams::Mdm, None))
    }
}

fn run_split(
    spec: &PipelineSpec,
    subject: &Subject,
    task: &Task,
    n_classes: usize,
    opts: &EvalOptions,
) -> Result<SplitResult> {
    let profiler = Profiler::new();
    let (params, classifier, grid) = select_params(spec, subject, task, n_classes, opts, &profiler)?;
    let order: Vec<usize> = task.train.iter().chain(&task.test).copied().collect();
    let epochs: Vec<&Epoch> = order.iter().map(|&i| subject.epochs[i]).collect();
    let labels: Vec<usize> = order.iter().map(|&i| subject.labels[i]).collect();
    let covs = profiler.stage(Stage::Covariance, || covariances(&epochs, params, opts.shrink))?;
    let n_train = task.train.len();
    let train: Vec<usize> = (0..n_train).collect();
    let test: Vec<usize> = (n_train..order.len()).collect();
    let score = score_split(&covs, &labels, &train, &test, n_classes, &classifier, &profiler)?;
    Ok(SplitResult {
        subject: subject.set.subject().to_string(),
        pipeline: spec.label(),
        session: task.session.clone(),
        split: task.split.clone(),
        score,
        order: params.order,
        lag: params.lag,
        classifier,
        timing: profiler.snapshot(),
        grid,
    })
}

fn within_tasks(subjects: &[Subject], n_classes: usize, opts: &EvalOptions) -> Result<Vec<Task>> {
    let mut tasks = Vec::new();
    for (si, subject) in subjects.iter().enumerate() {
        let name = subject.set.subject();
        let mut offset = 0;
        for (ki, session) in subject.set.sessions().iter().enumerate() {
            for class in 0..n_classes {
                let count = session.labels.iter().filter(|&&l| l == class).count();
                if count < opts.folds {
                    return Err(EvalError::TooFewSamples {
                        subject: name.to_string(),
                        session: session.id.clone(),
                        class,
                        count,
                        folds: opts.folds,
                    });
                }
            }
            let n = session.labels.len();
            let folds = stratified_folds(&session.labels, opts.folds, derive_seed(opts.seed, &[hash_str(name), ki as u64]));
            for (f, test) in folds.into_iter().enumerate() {
                let mut is_test = vec![false; n];
                test.iter().for_each(|&i| is_test[i] = true);
                tasks.push(Task {
                    subject: si,
                    session: session.id.clone(),
                    split: format!("fold{f}"),
                    train: (0..n).filter(|&i| !is_test[i]).map(|i| i + offset).collect(),
                    test: test.iter().map(|i| i + offset).collect(),
                    inner_seed: derive_seed(opts.seed, &[hash_str(name), ki as u64, f as u64, 1]),
                });
            }
            offset += n;
        }
    }
    Ok(tasks)
}

fn cross_tasks(subjects: &[Subject], opts: &EvalOptions) -> Result<Vec<Task>> {
    let mut tasks = Vec::new();
    for (si, subject) in subjects.iter().enumerate() {
        let sessions = subject.set.sessions();
        let name = subject.set.subject();
        if sessions.len() < 2 {
            return Err(EvalError::SingleSession {
                subject: name.to_string(),
            });
        }
        let bounds: Vec<(usize, usize)> = sessions
            .iter()
            .scan(0, |start, s| {
                let b = (*start, *start + s.labels.len());
                *start = b.1;
                Some(b)
            })
            .collect();
        for (h, held) in sessions.iter().enumerate() {
            let (lo, hi) = bounds[h];
            tasks.push(Task {
                subject: si,
                session: held.id.clone(),
                split: held.id.clone(),
                train: (0..subject.labels.len()).filter(|&i| i < lo || i >= hi).collect(),
                test: (lo..hi).collect(),
                inner_seed: derive_seed(opts.seed, &[hash_str(name), h as u64, 2]),
            });
        }
    }
    Ok(tasks)
}

fn assemble(
    kind: EvalKind,
    subjects: &[Subject],
    tasks: &[Task],
    pipelines: &[PipelineSpec],
    n_classes: usize,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let mut jobs = Vec::new();
    for si in 0..subjects.len() {
        for spec in pipelines {
            for task in tasks.iter().filter(|t| t.subject == si) {
                jobs.push((spec, task));
            }
        }
    }
    let outcomes: Vec<Result<SplitResult>> = jobs
        .par_iter()
        .map(|(spec, task)| run_split(spec, &subjects[task.subject], task, n_classes, opts))
        .collect();
    let splits = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let mut sessions: Vec<SessionScore> = Vec::new();
    for r in &splits {
        match sessions
            .iter_mut()
            .find(|s| s.subject == r.subject && s.pipeline == r.pipeline && s.session == r.session)
        {
            Some(s) => {
                s.score += r.score;
                s.n_splits += 1;
            }
            None => sessions.push(SessionScore {
                subject: r.subject.clone(),
                pipeline: r.pipeline.clone(),
                session: r.session.clone(),
                score: r.score,
                n_splits: 1,
            }),
        }
    }
    sessions.iter_mut().for_each(|s| s.score /= s.n_splits as f64);

    let mut report = EvalReport {
        dataset: opts.dataset.clone(),
        evaluation: kind,
        metric: if n_classes == 2 { Metric::Auc } else { Metric::Accuracy },
        seed: opts.seed,
        folds: (kind == EvalKind::Ws).then_some(opts.folds),
        pipelines: pipelines.iter().map(|p| p.label()).collect(),
        subjects: subjects.iter().map(|s| s.set.subject().to_string()).collect(),
        splits,
        sessions,
        summary: Vec::new(),
    };
    report.summary = report
        .pipelines
        .iter()
        .map(|p| {
            let scores: Vec<f64> = report
                .subject_scores(p)
                .expect("pipeline present")
                .into_iter()
                .map(|(_, s)| s)
                .collect();
            let n = scores.len() as f64;
            let mean = scores.iter().sum::<f64>() / n;
            let std = if scores.len() > 1 {
                (scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            PipelineSummary {
                pipeline: p.clone(),
                mean,
                std,
                n_subjects: scores.len(),
            }
        })
        .collect();
    Ok(report)
}

fn subjects_of(sets: &[EpochSet]) -> Vec<Subject<'_>> {
    sets.iter()
        .map(|set| Subject {
            set,
            epochs: set.epochs().collect(),
            labels: set.labels().collect(),
        })
        .collect()
}

/// Stratified `opts.folds`-fold cross-validation inside every session.
pub fn within_session_eval(subjects: &[EpochSet], pipelines: &[PipelineSpec], opts: &EvalOptions) -> Result<EvalReport> {
    let n_classes = check_inputs(subjects, pipelines, opts)?;
    let subjects = subjects_of(subjects);
    let tasks = within_tasks(&subjects, n_classes, opts)?;
    assemble(EvalKind::Ws, &subjects, &tasks, pipelines, n_classes, opts)
}

/// Train on all sessions but one, test on the held-out session, for every
/// session of every subject.
pub fn cross_session_eval(subjects: &[EpochSet], pipelines: &[PipelineSpec], opts: &EvalOptions) -> Result<EvalReport> {
    let n_classes = check_inputs(subjects, pipelines, opts)?;
    let subjects = subjects_of(subjects);
    let tasks = cross_tasks(&subjects, opts)?;
    assemble(EvalKind::Cs, &subjects, &tasks, pipelines, n_classes, opts)
}

pub fn evaluate(kind: EvalKind, subjects: &[EpochSet], pipelines: &[PipelineSpec], opts: &EvalOptions) -> Result<EvalReport> {
    match kind {
        EvalKind::Ws => within_session_eval(subjects, pipelines, opts),
        EvalKind::Cs => cross_session_eval(subjects, pipelines, opts),
    }
}
