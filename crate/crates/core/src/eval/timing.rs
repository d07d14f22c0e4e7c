use std::sync::Mutex;
use std::time::Instant;

use serde::Serialize;

/// Evaluation stages with separately accumulated wall time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Order/lag estimation from nonlinear-dynamics estimators.
    Estimation,
    GridSearch,
    Covariance,
    /// Class means or tangent map and SVM.
    Fit,
    Predict,
}

/// Seconds spent per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageTimes {
    pub estimation: f64,
    pub grid_search: f64,
    pub covariance: f64,
    pub fit: f64,
    pub predict: f64,
}

impl StageTimes {
    pub fn total(&self) -> f64 {
        self.estimation + self.grid_search + self.covariance + self.fit + self.predict
    }

    fn slot(&mut self, stage: Stage) -> &mut f64 {
        match stage {
            Stage::Estimation => &mut self.estimation,
            Stage::GridSearch => &mut self.grid_search,
            Stage::Covariance => &mut self.covariance,
            Stage::Fit => &mut self.fit,
            Stage::Predict => &mut self.predict,
        }
    }

    pub fn add(&mut self, other: &StageTimes) {
        self.estimation += other.estimation;
        self.grid_search += other.grid_search;
        self.covariance += other.covariance;
        self.fit += other.fit;
        self.predict += other.predict;
    }
}

/// Accumulates stage wall times; shareable across threads.
#[derive(Debug, Default)]
pub struct Profiler {
    times: Option<Mutex<StageTimes>>,
}

impl Profiler {
    pub fn new() -> Self {
        Profiler {
            times: Some(Mutex::new(StageTimes::default())),
        }
    }

    /// A profiler that records nothing.
    pub fn disabled() -> Self {
        Profiler { times: None }
    }

    pub fn stage<R>(&self, stage: Stage, f: impl FnOnce() -> R) -> R {
        let Some(times) = &self.times else { return f() };
        let start = Instant::now();
        let out = f();
        let elapsed = start.elapsed().as_secs_f64();
        *times.lock().expect("profiler lock").slot(stage) += elapsed;
        out
    }

    pub fn snapshot(&self) -> StageTimes {
        self.times
            .as_ref()
            .map(|t| *t.lock().expect("profiler lock"))
            .unwrap_or_default()
    }
}

/// Runs `run` with a fresh profiler and returns its result with the stage
/// times it recorded.
pub fn timing_profile<R>(run: impl FnOnce(&Profiler) -> R) -> (R, StageTimes) {
    let profiler = Profiler::new();
    let out = run(&profiler);
    (out, profiler.snapshot())
}
