//! One-tailed paired tests (alternative: the first pipeline is better) and
//! p-value combination.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use super::{EvalError, Result};

/// Largest number of non-zero differences handled by exact enumeration in
/// [`WilcoxonMethod::Auto`].
pub const WILCOXON_EXACT_MAX: usize = 12;

/// Fewest non-zero differences accepted by the signed-rank test.
pub const WILCOXON_MIN_PAIRS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WilcoxonMethod {
    /// Exact up to [`WILCOXON_EXACT_MAX`] non-zero differences, normal above.
    Auto,
    Exact,
    Normal,
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Mid-ranks of `|d|` doubled so that they are integers.
fn doubled_abs_ranks(d: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&a, &b| d[a].abs().total_cmp(&d[b].abs()));
    let mut ranks = vec![0u64; d.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && d[order[end]].abs() == d[order[start]].abs() {
            end += 1;
        }
        for &i in &order[start..end] {
            ranks[i] = (start + 1 + end) as u64;
        }
        ties.push(end - start);
        start = end;
    }
    (ranks, ties)
}

/// One-tailed Wilcoxon signed-rank p-value for `median(diffs) > 0`, with
/// zero differences dropped.
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> Result<f64> {
    wilcoxon_signed_rank_with(diffs, WilcoxonMethod::Auto)
}

pub fn wilcoxon_signed_rank_with(diffs: &[f64], method: WilcoxonMethod) -> Result<f64> {
    if diffs.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::InvalidInput("non-finite difference".into()));
    }
    let d: Vec<f64> = diffs.iter().copied().filter(|&v| v != 0.0).collect();
    if d.is_empty() {
        return Err(EvalError::AllZeroDiffs);
    }
    let n = d.len();
    if n < WILCOXON_MIN_PAIRS {
        return Err(EvalError::TooFewPairs {
            needed: WILCOXON_MIN_PAIRS,
            got: n,
        });
    }
    let (ranks, ties) = doubled_abs_ranks(&d);
    let observed: u64 = ranks.iter().zip(&d).filter(|(_, &v)| v > 0.0).map(|(r, _)| r).sum();
    let exact = match method {
        WilcoxonMethod::Auto => n <= WILCOXON_EXACT_MAX,
        WilcoxonMethod::Exact => true,
        WilcoxonMethod::Normal => false,
    };
    if exact {
        if n > 120 {
            return Err(EvalError::InvalidInput(format!("exact enumeration limited to 120 pairs, got {n}")));
        }
        // Number of sign assignments per doubled rank sum.
        let total: u64 = ranks.iter().sum();
        let mut ways = vec![0u128; total as usize + 1];
        ways[0] = 1;
        let mut reach = 0usize;
        for &r in &ranks {
            let r = r as usize;
            for s in (0..=reach).rev() {
                if ways[s] > 0 {
                    ways[s + r] += ways[s];
                }
            }
            reach += r;
        }
        let tail: u128 = ways[observed as usize..].iter().sum();
        return Ok((tail as f64) / 2f64.powi(n as i32));
    }
    let nf = n as f64;
    let w = observed as f64 / 2.0;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    let z = (w - mean - 0.5) / var.sqrt();
    Ok(standard_normal().cdf(-z))
}

fn t_statistic(d: &[f64]) -> f64 {
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let ss: f64 = d.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sd = (ss / (n - 1.0)).sqrt();
    if sd > 0.0 {
        mean / (sd / n.sqrt())
    } else if mean == 0.0 {
        0.0
    } else {
        mean.signum() * f64::INFINITY
    }
}

fn mean_statistic(d: &[f64]) -> f64 {
    d.iter().sum::<f64>() / d.len() as f64
}

/// Sign-flip permutation p-value of `stat`: exhaustive (`count / 2ⁿ`, the
/// identity included) when `2ⁿ ≤ n_perm`, otherwise
/// `(1 + count) / (n_perm + 1)` over random flips.
fn sign_flip_p(d: &[f64], n_perm: usize, seed: u64, stat: fn(&[f64]) -> f64) -> f64 {
    let n = d.len();
    let observed = stat(d);
    let reached = |t: f64| t >= observed - 1e-12 * observed.abs().max(1.0);
    let mut flipped = d.to_vec();
    if n < 63 && (1u64 << n) <= n_perm as u64 {
        let total = 1u64 << n;
        let mut count = 0u64;
        for mask in 0..total {
            for (i, f) in flipped.iter_mut().enumerate() {
                *f = if mask >> i & 1 == 1 { -d[i] } else { d[i] };
            }
            if reached(stat(&flipped)) {
                count += 1;
            }
        }
        return count as f64 / total as f64;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut count = 0usize;
    for _ in 0..n_perm {
        for (f, &v) in flipped.iter_mut().zip(d) {
            *f = if rng.random::<bool>() { -v } else { v };
        }
        if reached(stat(&flipped)) {
            count += 1;
        }
    }
    (1 + count) as f64 / (n_perm + 1) as f64
}

/// One-tailed paired t-test with a sign-flip permutation null.
pub fn permutation_paired_t(diffs: &[f64], n_perm: usize, seed: u64) -> Result<f64> {
    if diffs.len() < 3 {
        return Err(EvalError::TooFewPairs {
            needed: 3,
            got: diffs.len(),
        });
    }
    if diffs.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::InvalidInput("non-finite difference".into()));
    }
    if diffs.iter().all(|&v| v == diffs[0]) {
        return Err(EvalError::DegenerateVariance);
    }
    if n_perm == 0 {
        return Err(EvalError::InvalidInput("n_perm must be positive".into()));
    }
    Ok(sign_flip_p(diffs, n_perm, seed, t_statistic))
}

/// Sign-flip permutation test on the mean difference; defined whenever
/// the t statistic is not (constant differences, fewer than three pairs).
pub fn permutation_paired_mean(diffs: &[f64], n_perm: usize, seed: u64) -> Result<f64> {
    if diffs.is_empty() || n_perm == 0 {
        return Err(EvalError::InvalidInput("need differences and a positive n_perm".into()));
    }
    if diffs.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::InvalidInput("non-finite difference".into()));
    }
    Ok(sign_flip_p(diffs, n_perm, seed, mean_statistic))
}

/// Weighted Stouffer combination of one-tailed p-values; equal weights when
/// `weights` is `None`. A single p-value is returned unchanged.
pub fn stouffer_combine(p_values: &[f64], weights: Option<&[f64]>) -> Result<f64> {
    if p_values.is_empty() {
        return Err(EvalError::InvalidInput("no p-values".into()));
    }
    if let Some(&p) = p_values.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
        return Err(EvalError::DegeneratePValue(p));
    }
    let w: Vec<f64> = match weights {
        Some(w) if w.len() == p_values.len() && w.iter().all(|&x| x > 0.0 && x.is_finite()) => w.to_vec(),
        Some(_) => return Err(EvalError::InvalidInput("weights must be positive, one per p-value".into())),
        None => vec![1.0; p_values.len()],
    };
    if p_values.len() == 1 {
        return Ok(p_values[0]);
    }
    let normal = standard_normal();
    let num: f64 = p_values.iter().zip(&w).map(|(&p, &wi)| -wi * normal.inverse_cdf(p)).sum();
    let den = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(normal.cdf(-num / den))
}

/// `min(1, m·p)`.
pub fn bonferroni(p: f64, m: usize) -> f64 {
    (p * m.max(1) as f64).min(1.0)
}

/// Cohen's d of paired differences, `mean / sd` with the `n − 1` sample
/// deviation. Zero when every difference is zero, `None` when the
/// differences are constant but non-zero or fewer than two.
pub fn cohen_d(diffs: &[f64]) -> Option<f64> {
    if diffs.iter().all(|&v| v == 0.0) && !diffs.is_empty() {
        return Some(0.0);
    }
    if diffs.len() < 2 {
        return None;
    }
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let sd = (diffs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    (sd > 0.0).then(|| mean / sd)
}
