use rayon::prelude::*;
use serde::Serialize;

use super::{range_of, series_of, EmbeddingError, Result, DUPLICATE_TOL};
use crate::data::EpochSet;

/// Cao's `E1(d) = E(d+1) / E(d)` for `d = 1..=max_dim` (index `d − 1`).
///
/// `E(d)` is the mean over delay vectors of the ratio between the distance to
/// the nearest neighbor in dimension `d + 1` and in dimension `d`, with the
/// neighbor found in dimension `d` under the maximum norm. Exact repeats of a
/// state are skipped when searching neighbors.
pub fn cao_e1_curve(series: &[f64], tau: usize, max_dim: usize) -> Result<Vec<f64>> {
    if tau == 0 || max_dim == 0 {
        return Err(EmbeddingError::InvalidConfig("tau and max_dim must be >= 1".into()));
    }
    let n = series.len();
    let needed = (max_dim + 1) * tau + 10;
    if n <= needed {
        return Err(EmbeddingError::TooShort { needed, got: n });
    }
    let range = range_of(series);
    if !(range > 0.0) {
        return Err(EmbeddingError::ConstantSeries);
    }
    let tol = DUPLICATE_TOL * range;
    let dims = max_dim + 1;
    let mut sum = vec![0.0; dims];
    let mut count = vec![0usize; dims];
    let mut best = vec![(f64::INFINITY, usize::MAX); dims];

    for i in 0..n - tau {
        best.iter_mut().for_each(|b| *b = (f64::INFINITY, usize::MAX));
        for j in 0..n - tau {
            if j == i {
                continue;
            }
            let mut dist: f64 = 0.0;
            for d in 1..=dims {
                let limit = n - d * tau;
                if i >= limit || j >= limit {
                    break;
                }
                let k = (d - 1) * tau;
                dist = dist.max((series[i + k] - series[j + k]).abs());
                if dist > tol && dist < best[d - 1].0 {
                    best[d - 1] = (dist, j);
                }
            }
        }
        for d in 1..=dims {
            let (dist, j) = best[d - 1];
            if j == usize::MAX {
                continue;
            }
            let k = d * tau;
            let next = dist.max((series[i + k] - series[j + k]).abs());
            sum[d - 1] += next / dist;
            count[d - 1] += 1;
        }
    }
    let e: Vec<f64> = sum
        .iter()
        .zip(&count)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { f64::NAN })
        .collect();
    Ok((0..max_dim).map(|d| e[d + 1] / e[d]).collect())
}

/// Embedding dimension from the saturation of the accumulated `E1` curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaoEstimate {
    pub dim: usize,
    /// Mean `E1` over all channels and epochs; index is `d − 1`.
    pub e1: Vec<f64>,
    /// True when `E1` never settled within the threshold and `dim` is
    /// `max_dim`.
    pub saturation_failed: bool,
}

/// Smallest `D` with `|E1(D) − 1|` and `|E1(D+1) − 1|` both below
/// `threshold`, using the `E1` curve averaged over every channel and epoch.
pub fn cao_embedding_dimension(
    set: &EpochSet,
    tau: usize,
    max_dim: usize,
    threshold: f64,
) -> Result<CaoEstimate> {
    if !(threshold > 0.0) {
        return Err(EmbeddingError::InvalidConfig("threshold must be positive".into()));
    }
    let series = series_of(set);
    let curves = series
        .par_iter()
        .map(|s| cao_e1_curve(s, tau, max_dim))
        .collect::<Result<Vec<_>>>()?;
    let mut e1 = vec![0.0; max_dim];
    for c in &curves {
        e1.iter_mut().zip(c).for_each(|(acc, v)| *acc += v);
    }
    e1.iter_mut().for_each(|v| *v /= curves.len() as f64);

    let settled = |d: usize| (e1[d - 1] - 1.0).abs() < threshold;
    match (1..max_dim).find(|&d| settled(d) && settled(d + 1)) {
        Some(dim) => Ok(CaoEstimate {
            dim,
            e1,
            saturation_failed: false,
        }),
        None => Ok(CaoEstimate {
            dim: max_dim,
            e1,
            saturation_failed: true,
        }),
    }
}
