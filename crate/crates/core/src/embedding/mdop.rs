//! Iterative embedding that adds, one cycle at a time, the delayed coordinate
//! maximizing the beta statistic (mean log10 directional derivative between
//! nearest neighbors), and stops once the fraction of false nearest
//! neighbors drops below a threshold.

use rayon::prelude::*;
use serde::Serialize;

use super::{range_of, series_of, EmbeddingError, Result, DUPLICATE_TOL};
use crate::data::EpochSet;

/// Tuning of the unified estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdopConfig {
    /// Candidate delays are `1..=max_lag`.
    pub max_lag: usize,
    pub max_cycles: usize,
    /// Stop once the false-neighbor fraction falls below this value.
    pub fnn_threshold: f64,
    /// A neighbor is false when the new coordinate separates it by more than
    /// this multiple of the current distance.
    pub fnn_ratio: f64,
    /// Temporal neighbors with `|t − t'| ≤ theiler` are excluded.
    pub theiler: usize,
}

impl Default for MdopConfig {
    fn default() -> Self {
        MdopConfig {
            max_lag: super::DEFAULT_MAX_LAG,
            max_cycles: 10,
            fnn_threshold: 0.05,
            fnn_ratio: 2.0,
            theiler: 1,
        }
    }
}

/// One embedding cycle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MdopCycle {
    /// Delay of the coordinate added in this cycle.
    pub lag: usize,
    /// Beta statistic per candidate delay (index `lag − 1`); already used
    /// delays are `-inf`.
    pub beta: Vec<f64>,
    /// False-nearest-neighbor fraction when adding `lag` to the embedding of
    /// the previous cycle.
    pub fnn: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MdopEstimate {
    /// Rounded mean of the per-cycle delays.
    pub tau: usize,
    /// Number of cycles.
    pub dim: usize,
    pub cycles: Vec<MdopCycle>,
    /// False when the run stopped at `max_cycles` (or ran out of candidate
    /// delays) without the FNN fraction falling below the threshold.
    pub terminated: bool,
}

/// Nearest neighbor (Euclidean) of every point of the delay embedding with
/// coordinates `s(t − δ)` for `δ ∈ delays`, over `t ∈ [offset, n)`.
fn nearest_neighbors(
    s: &[f64],
    delays: &[usize],
    offset: usize,
    theiler: usize,
    tol2: f64,
) -> Vec<Option<(usize, f64)>> {
    let n = s.len();
    (offset..n)
        .map(|t| {
            let mut best: Option<(usize, f64)> = None;
            for u in offset..n {
                if t.abs_diff(u) <= theiler {
                    continue;
                }
                let mut d2 = 0.0;
                for &delay in delays {
                    let diff = s[t - delay] - s[u - delay];
                    d2 += diff * diff;
                }
                if d2 > tol2 && best.is_none_or(|(_, b)| d2 < b) {
                    best = Some((u, d2));
                }
            }
            best.map(|(u, d2)| (u, d2.sqrt()))
        })
        .collect()
}

/// Per-series accumulators of one cycle: beta log-sums per candidate and the
/// neighbor list reused by the FNN count.
struct SeriesCycle {
    beta_sum: Vec<f64>,
    beta_count: usize,
    neighbors: Vec<Option<(usize, f64)>>,
}

fn cycle_for_series(s: &[f64], delays: &[usize], config: &MdopConfig) -> SeriesCycle {
    let offset = config.max_lag;
    let range = range_of(s);
    let tol = DUPLICATE_TOL * range;
    let neighbors = nearest_neighbors(s, delays, offset, config.theiler, tol * tol);
    let mut beta_sum = vec![0.0; config.max_lag];
    let mut beta_count = 0;
    for (i, nn) in neighbors.iter().enumerate() {
        let Some((u, dist)) = *nn else { continue };
        let t = offset + i;
        beta_count += 1;
        for lag in 1..=config.max_lag {
            let ratio = (s[t - lag] - s[u - lag]).abs() / dist;
            beta_sum[lag - 1] += ratio.max(1e-12).log10();
        }
    }
    SeriesCycle {
        beta_sum,
        beta_count,
        neighbors,
    }
}

fn false_neighbors(s: &[f64], cycle: &SeriesCycle, lag: usize, config: &MdopConfig) -> (usize, usize) {
    let offset = config.max_lag;
    let mut false_count = 0;
    let mut total = 0;
    for (i, nn) in cycle.neighbors.iter().enumerate() {
        let Some((u, dist)) = *nn else { continue };
        let t = offset + i;
        total += 1;
        if (s[t - lag] - s[u - lag]).abs() / dist > config.fnn_ratio {
            false_count += 1;
        }
    }
    (false_count, total)
}

/// Unified delay/dimension estimate with default tuning apart from
/// `max_cycles` and `fnn_threshold`.
pub fn mdop_unified(set: &EpochSet, max_cycles: usize, fnn_threshold: f64) -> Result<MdopEstimate> {
    mdop_with(
        set,
        &MdopConfig {
            max_cycles,
            fnn_threshold,
            ..MdopConfig::default()
        },
    )
}

/// Runs the cycle loop over every channel of every epoch, summing beta
/// statistics and FNN counts across series before each decision.
pub fn mdop_with(set: &EpochSet, config: &MdopConfig) -> Result<MdopEstimate> {
    if config.max_lag == 0 || config.max_cycles == 0 {
        return Err(EmbeddingError::InvalidConfig("max_lag and max_cycles must be >= 1".into()));
    }
    if !(config.fnn_threshold > 0.0 && config.fnn_ratio > 0.0) {
        return Err(EmbeddingError::InvalidConfig("thresholds must be positive".into()));
    }
    let series = series_of(set);
    let n = set.samples();
    let needed = config.max_lag + config.theiler + 10;
    if n <= needed {
        return Err(EmbeddingError::TooShort { needed, got: n });
    }
    if series.iter().any(|s| !(range_of(s) > 0.0)) {
        return Err(EmbeddingError::ConstantSeries);
    }

    let mut delays = vec![0usize];
    let mut cycles = Vec::new();
    let mut terminated = false;
    while cycles.len() < config.max_cycles && delays.len() <= config.max_lag {
        let per_series: Vec<SeriesCycle> = series
            .par_iter()
            .map(|s| cycle_for_series(s, &delays, config))
            .collect();
        let mut beta = vec![0.0; config.max_lag];
        let mut count = 0usize;
        for c in &per_series {
            beta.iter_mut().zip(&c.beta_sum).for_each(|(b, v)| *b += v);
            count += c.beta_count;
        }
        if count == 0 {
            return Err(EmbeddingError::TooShort { needed, got: n });
        }
        for (i, b) in beta.iter_mut().enumerate() {
            *b = if delays.contains(&(i + 1)) {
                f64::NEG_INFINITY
            } else {
                *b / count as f64
            };
        }
        let mut lag = 0;
        for (i, &b) in beta.iter().enumerate() {
            if b.is_finite() && (lag == 0 || b > beta[lag - 1]) {
                lag = i + 1;
            }
        }
        let (mut fnn_false, mut fnn_total) = (0usize, 0usize);
        for (s, c) in series.iter().zip(&per_series) {
            let (f, t) = false_neighbors(s, c, lag, config);
            fnn_false += f;
            fnn_total += t;
        }
        let fnn = fnn_false as f64 / fnn_total.max(1) as f64;
        delays.push(lag);
        cycles.push(MdopCycle { lag, beta, fnn });
        if fnn < config.fnn_threshold {
            terminated = true;
            break;
        }
    }

    let dim = cycles.len();
    let mean = cycles.iter().map(|c| c.lag as f64).sum::<f64>() / dim as f64;
    let tau = ((mean + 0.5).floor() as usize).max(1);
    if (dim - 1) * tau >= n {
        return Err(EmbeddingError::TooShort {
            needed: (dim - 1) * tau,
            got: n,
        });
    }
    Ok(MdopEstimate {
        tau,
        dim,
        cycles,
        terminated,
    })
}
