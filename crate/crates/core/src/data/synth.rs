//! Synthetic datasets: vector autoregressive epochs and multichannel sines.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DataError, EpochSet, Result, Session};
use crate::covariance::Epoch;
use crate::spd::SpdMatrix;

/// Dynamics of one class: `x_t = Σ_i A_i x_{t−iτ} + ε_t`, `ε_t ~ N(0, U)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArClass {
    pub name: String,
    /// `A_1..A_p`, each given as rows.
    pub coefficients: Vec<Vec<Vec<f64>>>,
    /// Innovation covariance `U`, given as rows.
    pub innovation: Vec<Vec<f64>>,
}

/// Generator configuration. The JSON form of this struct is the input of the
/// `simulate` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArSpec {
    #[serde(default = "default_subject")]
    pub subject: String,
    pub sample_rate: f64,
    /// Generator lag `τ_gen`.
    #[serde(default = "one")]
    pub lag: usize,
    pub n_samples: usize,
    pub epochs_per_class: usize,
    #[serde(default = "one")]
    pub n_sessions: usize,
    pub seed: u64,
    pub classes: Vec<ArClass>,
}

fn default_subject() -> String {
    "synthetic".into()
}

fn one() -> usize {
    1
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(DataError::InvalidSpec(format!("{what} is empty or ragged")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Validated numeric form of one class.
struct ClassModel {
    coefficients: Vec<DMatrix<f64>>,
    chol: DMatrix<f64>,
}

/// Spectral radius of the companion matrix of `A_1..A_p`.
pub(crate) fn companion_radius(coefficients: &[DMatrix<f64>]) -> f64 {
    let p = coefficients.len();
    if p == 0 {
        return 0.0;
    }
    let d = coefficients[0].nrows();
    let mut comp = DMatrix::zeros(d * p, d * p);
    for (i, a) in coefficients.iter().enumerate() {
        comp.view_mut((0, i * d), (d, d)).copy_from(a);
    }
    for i in 1..p {
        comp.view_mut((i * d, (i - 1) * d), (d, d))
            .copy_from(&DMatrix::identity(d, d));
    }
    comp.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

impl ArClass {
    pub fn new(name: impl Into<String>, coefficients: &[DMatrix<f64>], innovation: &DMatrix<f64>) -> Self {
        ArClass {
            name: name.into(),
            coefficients: coefficients.iter().map(matrix_to_rows).collect(),
            innovation: matrix_to_rows(innovation),
        }
    }

    pub fn coefficient_matrices(&self) -> Result<Vec<DMatrix<f64>>> {
        self.coefficients
            .iter()
            .map(|a| rows_to_matrix(a, "coefficient"))
            .collect()
    }

    pub fn innovation_matrix(&self) -> Result<DMatrix<f64>> {
        rows_to_matrix(&self.innovation, "innovation")
    }

    fn model(&self) -> Result<ClassModel> {
        let u = self.innovation_matrix()?;
        let d = u.nrows();
        if u.ncols() != d {
            return Err(DataError::InvalidSpec(format!("class {}: innovation not square", self.name)));
        }
        SpdMatrix::new(u.clone())
            .map_err(|e| DataError::InvalidSpec(format!("class {}: innovation {e}", self.name)))?;
        let coefficients = self.coefficient_matrices()?;
        if coefficients.iter().any(|a| a.nrows() != d || a.ncols() != d) {
            return Err(DataError::InvalidSpec(format!(
                "class {}: coefficient shape differs from {d}x{d}",
                self.name
            )));
        }
        let radius = companion_radius(&coefficients);
        if !(radius < 1.0) {
            return Err(DataError::UnstableSpec {
                class: self.name.clone(),
                radius,
            });
        }
        let chol = u.cholesky().expect("SPD checked above").unpack();
        Ok(ClassModel { coefficients, chol })
    }
}

impl ArSpec {
    /// Two classes sharing the lag-0 covariance `sigma` but with opposite
    /// first-order dynamics, `A_1 = ±ρ I` and `U = (1 − ρ²) Σ`.
    ///
    /// The two processes differ by a sign flip on every other sample, so the
    /// distributions of their spatial covariances coincide exactly while the
    /// lag-1 cross-covariances have opposite signs.
    pub fn matched_covariance_pair(
        sigma: &DMatrix<f64>,
        rho: f64,
        n_samples: usize,
        epochs_per_class: usize,
        seed: u64,
    ) -> ArSpec {
        let d = sigma.nrows();
        let u = sigma * (1.0 - rho * rho);
        let a = DMatrix::<f64>::identity(d, d) * rho;
        ArSpec {
            subject: default_subject(),
            sample_rate: 250.0,
            lag: 1,
            n_samples,
            epochs_per_class,
            n_sessions: 1,
            seed,
            classes: vec![
                ArClass::new("positive", &[a.clone()], &u),
                ArClass::new("negative", &[-a], &u),
            ],
        }
    }

    pub fn channels(&self) -> usize {
        self.classes.first().map_or(0, |c| c.innovation.len())
    }
}

/// Index of the `(session, class, epoch)` substream.
fn stream_id(spec: &ArSpec, session: usize, class: usize, epoch: usize) -> u64 {
    ((session * spec.classes.len() + class) * spec.epochs_per_class + epoch) as u64
}

fn simulate_epoch(model: &ClassModel, spec: &ArSpec, stream: u64) -> Result<Epoch> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(stream);
    let d = model.chol.nrows();
    let p = model.coefficients.len();
    let lag = spec.lag;
    let burn = 10 * p * lag;
    let total = burn + spec.n_samples;
    let mut x = DMatrix::zeros(d, total);
    let mut z = DVector::zeros(d);
    for t in 0..total {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let mut xt = &model.chol * &z;
        for (i, a) in model.coefficients.iter().enumerate() {
            let back = (i + 1) * lag;
            if t >= back {
                xt += a * x.column(t - back);
            }
        }
        x.set_column(t, &xt);
    }
    Ok(Epoch::new(
        x.columns(burn, spec.n_samples).into_owned(),
        spec.sample_rate,
    )?)
}

/// Simulates the dataset described by `spec`.
///
/// Epochs of each session interleave the classes. Each epoch draws from its
/// own ChaCha substream keyed by (session, class, epoch), so the output does
/// not depend on the number of worker threads.
pub fn generate_ar_dataset(spec: &ArSpec) -> Result<EpochSet> {
    if spec.classes.is_empty() {
        return Err(DataError::InvalidSpec("no classes".into()));
    }
    if spec.lag == 0 || spec.n_samples < 2 || spec.epochs_per_class == 0 || spec.n_sessions == 0 {
        return Err(DataError::InvalidSpec(
            "lag, epochs_per_class and n_sessions must be >= 1 and n_samples >= 2".into(),
        ));
    }
    let models = spec.classes.iter().map(ArClass::model).collect::<Result<Vec<_>>>()?;
    let d = models[0].chol.nrows();
    if models.iter().any(|m| m.chol.nrows() != d) {
        return Err(DataError::InvalidSpec("classes differ in channel count".into()));
    }
    let n_classes = spec.classes.len();
    let per_session = n_classes * spec.epochs_per_class;
    let sessions = (0..spec.n_sessions)
        .map(|s| {
            let epochs = (0..per_session)
                .into_par_iter()
                .map(|k| {
                    let (e, c) = (k / n_classes, k % n_classes);
                    simulate_epoch(&models[c], spec, stream_id(spec, s, c, e))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Session {
                id: format!("session_{s}"),
                epochs,
                labels: (0..per_session).map(|k| k % n_classes).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EpochSet::new(
        spec.subject.clone(),
        spec.classes.iter().map(|c| c.name.clone()).collect(),
        spec.sample_rate,
        sessions,
    )
}

/// Multichannel sinusoids with a random phase per channel and epoch plus
/// optional white noise of standard deviation `noise`.
///
/// Two nominal classes alternate; both share the same signal model.
pub fn sine_dataset(
    channels: usize,
    n_samples: usize,
    period: f64,
    n_epochs: usize,
    noise: f64,
    seed: u64,
) -> Result<EpochSet> {
    let sample_rate = 250.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let epochs = (0..n_epochs)
        .map(|_| {
            let phases: Vec<f64> = (0..channels)
                .map(|_| rng.random::<f64>() * std::f64::consts::TAU)
                .collect();
            let data = DMatrix::from_fn(channels, n_samples, |c, t| {
                (std::f64::consts::TAU * t as f64 / period + phases[c]).sin()
            });
            let data = if noise > 0.0 {
                data.map(|v| v + noise * rng.sample::<f64, _>(StandardNormal))
            } else {
                data
            };
            Epoch::new(data, sample_rate).map_err(DataError::from)
        })
        .collect::<Result<Vec<_>>>()?;
    EpochSet::new(
        "sine",
        vec!["a".into(), "b".into()],
        sample_rate,
        vec![Session {
            id: "session_0".into(),
            labels: (0..n_epochs).map(|i| i % 2).collect(),
            epochs,
        }],
    )
}
