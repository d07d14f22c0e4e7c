//! Covariance estimators for multichannel epochs: the plain spatial
//! covariance, the augmented (lag-stacked) covariance, Ledoit-Wolf shrinkage
//! toward a scaled identity, and a block Yule-Walker solver.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::spd::{symmetrize, SpdError, SpdMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CovarianceError {
    #[error("invalid epoch: {0}")]
    InvalidEpoch(String),
    #[error("invalid augmentation parameters: order and lag must be >= 1 (got order {order}, lag {lag})")]
    InvalidParams { order: usize, lag: usize },
    #[error("lag too large: (order - 1) * lag = {span} must be below the epoch length {samples}")]
    LagTooLarge { span: usize, samples: usize },
    #[error("covariance is not SPD ({0}); enable shrinkage or use more samples")]
    NotSpd(#[source] SpdError),
    #[error("covariance is inconsistent with its data matrix (max deviation {deviation:.3e})")]
    InconsistentInput { deviation: f64 },
    #[error("Yule-Walker system is singular (reciprocal condition {rcond:.3e})")]
    SingularSystem { rcond: f64 },
}

pub type Result<T> = std::result::Result<T, CovarianceError>;

/// A fixed-length window of a multichannel signal, stored channels × samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    data: DMatrix<f64>,
    sample_rate: f64,
}

impl Epoch {
    pub fn new(data: DMatrix<f64>, sample_rate: f64) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(CovarianceError::InvalidEpoch("no channels".into()));
        }
        if data.ncols() < 2 {
            return Err(CovarianceError::InvalidEpoch(format!(
                "need at least 2 samples, got {}",
                data.ncols()
            )));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(CovarianceError::InvalidEpoch(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(CovarianceError::InvalidEpoch(format!(
                "non-finite value at channel {}, sample {}",
                pos % data.nrows(),
                pos / data.nrows()
            )));
        }
        Ok(Epoch { data, sample_rate })
    }

    /// Builds an epoch from per-channel rows.
    pub fn from_rows(rows: &[Vec<f64>], sample_rate: f64) -> Result<Self> {
        let d = rows.len();
        let t = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != t) {
            return Err(CovarianceError::InvalidEpoch("ragged channel rows".into()));
        }
        Epoch::new(DMatrix::from_fn(d, t, |i, j| rows[i][j]), sample_rate)
    }

    pub fn channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data.row(c).iter().copied().collect()
    }

    pub fn scaled(&self, factor: f64) -> Epoch {
        Epoch {
            data: &self.data * factor,
            sample_rate: self.sample_rate,
        }
    }
}

/// Order `p` and lag `τ` of the augmented covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct AugmentedParams {
    pub order: usize,
    pub lag: usize,
}

impl AugmentedParams {
    pub fn new(order: usize, lag: usize) -> Result<Self> {
        if order == 0 || lag == 0 {
            return Err(CovarianceError::InvalidParams { order, lag });
        }
        Ok(AugmentedParams { order, lag })
    }

    /// The plain spatial covariance.
    pub const PLAIN: AugmentedParams = AugmentedParams { order: 1, lag: 1 };

    /// Number of samples consumed by the stacking, `(p − 1)·τ`.
    pub fn span(&self) -> usize {
        (self.order - 1) * self.lag
    }

    pub fn fits(&self, samples: usize) -> bool {
        self.span() < samples
    }

    fn check(&self, samples: usize) -> Result<()> {
        if self.order == 0 || self.lag == 0 {
            return Err(CovarianceError::InvalidParams {
                order: self.order,
                lag: self.lag,
            });
        }
        if !self.fits(samples) {
            return Err(CovarianceError::LagTooLarge {
                span: self.span(),
                samples,
            });
        }
        Ok(())
    }
}

/// `(1/(T−1)) Σ_t x_t x_tᵀ`, without mean removal.
pub fn sample_covariance(x: &Epoch) -> Result<SpdMatrix> {
    let c = raw_covariance(x.data());
    SpdMatrix::new(c).map_err(CovarianceError::NotSpd)
}

fn raw_covariance(y: &DMatrix<f64>) -> DMatrix<f64> {
    let m = y.ncols() as f64;
    symmetrize(&(y * y.transpose())) / (m - 1.0)
}

/// Stacks `p` delayed copies of the epoch.
///
/// The result has `d·p` rows and `T − (p−1)τ` columns. Row block `k` at
/// column `j` holds `X[:, j + k·τ]`, so block 0 is the most delayed copy
/// relative to the newest sample `j + (p−1)τ` and each column lists a delay
/// vector in increasing time order.
pub fn embed_epoch(x: &Epoch, params: AugmentedParams) -> Result<Epoch> {
    params.check(x.samples())?;
    if params.order == 1 {
        return Ok(x.clone());
    }
    let d = x.channels();
    let width = x.samples() - params.span();
    let mut out = DMatrix::zeros(d * params.order, width);
    for k in 0..params.order {
        let block = x.data().columns(k * params.lag, width);
        out.view_mut((k * d, 0), (d, width)).copy_from(&block);
    }
    Ok(Epoch {
        data: out,
        sample_rate: x.sample_rate,
    })
}

/// Sample covariance of the delay-embedded epoch, optionally followed by
/// Ledoit-Wolf shrinkage. Output dimension is `d·p`.
pub fn augmented_covariance(x: &Epoch, params: AugmentedParams, shrink: bool) -> Result<SpdMatrix> {
    let embedded = embed_epoch(x, params)?;
    if !shrink {
        return sample_covariance(&embedded);
    }
    let c = raw_covariance(embedded.data());
    shrink_consistent(c, embedded.data()).map(|(m, _)| m)
}

/// Ledoit-Wolf shrinkage toward `(Tr C / n)·I`.
///
/// `y` is the `n × m` data matrix `c` was estimated from, `c = y yᵀ/(m−1)`.
/// Returns the shrunk matrix and the intensity `λ ∈ [0, 1]`.
pub fn ledoit_wolf(c: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<(SpdMatrix, f64)> {
    let n = c.nrows();
    if c.ncols() != n || y.nrows() != n || y.ncols() < 2 {
        return Err(CovarianceError::InconsistentInput {
            deviation: f64::INFINITY,
        });
    }
    let expected = raw_covariance(y);
    let deviation = (c - &expected).amax();
    let scale = expected.amax().max(f64::MIN_POSITIVE);
    if !(deviation <= 1e-9 * scale) {
        return Err(CovarianceError::InconsistentInput { deviation });
    }
    shrink_consistent(symmetrize(c), y)
}

/// Shrinkage intensity for `c = y yᵀ/(m−1)`.
///
/// With `μ = Tr C / n`, `d² = ‖C − μI‖²_F` and
/// `b̄² = (1/m²) Σ_k ‖y_k y_kᵀ − C‖²_F`, the intensity is `min(b̄², d²) / d²`.
/// The sum over samples collapses to `Σ_k ‖y_k‖⁴ − (m − 2)‖C‖²_F`.
pub fn ledoit_wolf_intensity(c: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let n = c.nrows();
    let m = y.ncols() as f64;
    let mu = c.trace() / n as f64;
    let c_norm2 = c.norm_squared();
    let d2 = c_norm2 - 2.0 * mu * c.trace() + mu * mu * n as f64;
    if !(d2 > 0.0) {
        return 0.0;
    }
    let fourth: f64 = y.column_iter().map(|col| col.norm_squared().powi(2)).sum();
    let b_bar2 = ((fourth - (m - 2.0) * c_norm2) / (m * m)).max(0.0);
    (b_bar2.min(d2) / d2).clamp(0.0, 1.0)
}

fn shrink_consistent(c: DMatrix<f64>, y: &DMatrix<f64>) -> Result<(SpdMatrix, f64)> {
    let n = c.nrows();
    let lambda = ledoit_wolf_intensity(&c, y);
    let mu = c.trace() / n as f64;
    let mut shrunk = c * (1.0 - lambda);
    for i in 0..n {
        shrunk[(i, i)] += lambda * mu;
    }
    let spd = SpdMatrix::new(shrunk).map_err(CovarianceError::NotSpd)?;
    Ok((spd, lambda))
}

/// Lagged auto-covariances `Γ(h) = (1/T) Σ_t x_t x_{t−h}ᵀ` for `h = 0..=max_lag`.
pub fn lagged_covariances(x: &Epoch, max_lag: usize) -> Result<Vec<DMatrix<f64>>> {
    let t = x.samples();
    if max_lag >= t {
        return Err(CovarianceError::LagTooLarge {
            span: max_lag,
            samples: t,
        });
    }
    let data = x.data();
    Ok((0..=max_lag)
        .map(|h| {
            let width = t - h;
            let lead = data.columns(h, width);
            let lagged = data.columns(0, width);
            lead * lagged.transpose() / t as f64
        })
        .collect())
}

/// AR coefficients and innovation covariance from the Yule-Walker equations.
#[derive(Debug, Clone, PartialEq)]
pub struct YuleWalkerSolution {
    pub coefficients: Vec<DMatrix<f64>>,
    pub innovation_cov: DMatrix<f64>,
}

/// Solves `Γ(k) = Σ_i A_i Γ(k−i)` for `k = 1..=p` with `Γ(−h) = Γ(h)ᵀ`.
///
/// `gammas[h]` is `Γ(h) = E[x_t x_{t−h}ᵀ]`; at least `p + 1` blocks are needed.
/// The innovation covariance comes from the lag-0 line,
/// `U = Γ(0) − Σ_i A_i Γ(i)ᵀ`.
pub fn yule_walker_solve(gammas: &[DMatrix<f64>], p: usize) -> Result<YuleWalkerSolution> {
    if p == 0 || gammas.len() < p + 1 {
        return Err(CovarianceError::InvalidParams { order: p, lag: 1 });
    }
    let d = gammas[0].nrows();
    if gammas.iter().any(|g| g.nrows() != d || g.ncols() != d) {
        return Err(CovarianceError::InvalidEpoch(
            "lagged covariance blocks differ in shape".into(),
        ));
    }
    let gamma = |h: isize| -> DMatrix<f64> {
        if h >= 0 {
            gammas[h as usize].clone()
        } else {
            gammas[(-h) as usize].transpose()
        }
    };
    let mut g = DMatrix::zeros(d * p, d * p);
    for i in 0..p {
        for k in 0..p {
            g.view_mut((i * d, k * d), (d, d))
                .copy_from(&gamma(k as isize - i as isize));
        }
    }
    let mut rhs = DMatrix::zeros(d * p, d);
    for k in 0..p {
        rhs.view_mut((k * d, 0), (d, d))
            .copy_from(&gammas[k + 1].transpose());
    }

    let g = symmetrize(&g);
    let eig = g.symmetric_eigenvalues();
    let max = eig.amax();
    let min = eig.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    let rcond = if max > 0.0 { min / max } else { 0.0 };
    if !(rcond > 1e-12) {
        return Err(CovarianceError::SingularSystem { rcond });
    }
    let solved = g
        .lu()
        .solve(&rhs)
        .ok_or(CovarianceError::SingularSystem { rcond })?;
    let coefficients: Vec<DMatrix<f64>> = (0..p)
        .map(|i| solved.view((i * d, 0), (d, d)).transpose())
        .collect();

    let mut u = gammas[0].clone();
    for (i, a) in coefficients.iter().enumerate() {
        u -= a * gammas[i + 1].transpose();
    }
    Ok(YuleWalkerSolution {
        coefficients,
        innovation_cov: symmetrize(&u),
    })
}
