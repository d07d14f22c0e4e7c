use rayon::prelude::*;
use serde::Serialize;

use super::{range_of, series_of, EmbeddingError, Result};
use crate::data::EpochSet;

/// Mutual information (nats) between `x_t` and `x_{t+lag}` for every
/// `lag = 0..=max_lag`; index equals lag.
///
/// Uses a `bins × bins` joint histogram with equal-width bins spanning the
/// range of the whole series.
pub fn average_mutual_information(series: &[f64], max_lag: usize, bins: usize) -> Result<Vec<f64>> {
    if bins < 2 {
        return Err(EmbeddingError::InvalidConfig(format!("bins must be >= 2, got {bins}")));
    }
    let n = series.len();
    if n <= max_lag + 10 {
        return Err(EmbeddingError::TooShort {
            needed: max_lag + 10,
            got: n,
        });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(EmbeddingError::InvalidConfig("series contains non-finite values".into()));
    }
    let lo = series.iter().copied().fold(f64::INFINITY, f64::min);
    let width = range_of(series);
    if !(width > 0.0) {
        return Err(EmbeddingError::ConstantSeries);
    }
    let bin: Vec<usize> = series
        .iter()
        .map(|&v| (((v - lo) / width * bins as f64) as usize).min(bins - 1))
        .collect();

    let mut joint = vec![0usize; bins * bins];
    let mut px = vec![0usize; bins];
    let mut py = vec![0usize; bins];
    Ok((0..=max_lag)
        .map(|lag| {
            joint.iter_mut().for_each(|c| *c = 0);
            px.iter_mut().for_each(|c| *c = 0);
            py.iter_mut().for_each(|c| *c = 0);
            let pairs = n - lag;
            for t in 0..pairs {
                let (a, b) = (bin[t], bin[t + lag]);
                joint[a * bins + b] += 1;
                px[a] += 1;
                py[b] += 1;
            }
            let total = pairs as f64;
            let mut mi = 0.0;
            for a in 0..bins {
                for b in 0..bins {
                    let c = joint[a * bins + b];
                    if c > 0 {
                        let c = c as f64;
                        mi += c / total * (c * total / (px[a] as f64 * py[b] as f64)).ln();
                    }
                }
            }
            mi.max(0.0)
        })
        .collect())
}

/// Smallest `lag ≥ 1` with `c[lag−1] > c[lag] < c[lag+1]`.
pub fn first_local_minimum(curve: &[f64]) -> Option<usize> {
    (1..curve.len().saturating_sub(1)).find(|&l| curve[l] < curve[l - 1] && curve[l] < curve[l + 1])
}

/// Delay chosen from the accumulated mutual-information curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauEstimate {
    pub tau: usize,
    /// Sum over all channels and epochs; index equals lag.
    pub curve: Vec<f64>,
    /// False when the curve has no strict local minimum and `tau` is the
    /// argmin over `1..=max_lag` instead.
    pub local_minimum: bool,
}

/// First strict local minimum of the mutual information summed over every
/// channel and epoch.
pub fn select_tau_ami(set: &EpochSet, max_lag: usize, bins: usize) -> Result<TauEstimate> {
    if max_lag == 0 {
        return Err(EmbeddingError::InvalidConfig("max_lag must be >= 1".into()));
    }
    let curves = series_of(set)
        .par_iter()
        .map(|s| average_mutual_information(s, max_lag, bins))
        .collect::<Result<Vec<_>>>()?;
    let mut curve = vec![0.0; max_lag + 1];
    for c in &curves {
        curve.iter_mut().zip(c).for_each(|(acc, v)| *acc += v);
    }
    let (tau, local_minimum) = match first_local_minimum(&curve) {
        Some(l) => (l, true),
        None => {
            let mut best = 1;
            for l in 2..=max_lag {
                if curve[l] < curve[best] {
                    best = l;
                }
            }
            (best, false)
        }
    };
    Ok(TauEstimate {
        tau,
        curve,
        local_minimum,
    })
}
