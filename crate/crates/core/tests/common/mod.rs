//! Independent reference implementations and generators shared by the
//! integration tests. Everything here is written from the defining formulas
//! without going through the library's own helpers.

#![allow(dead_code)]

use acm::covariance::Epoch;
use acm::data::{generate_ar_dataset, ArSpec, EpochSet};
use acm::spd::SpdMatrix;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// `Q diag(e^{u}) Qᵀ` with a random orthogonal `Q` and `u ~ U(−spread, spread)`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> SpdMatrix {
    let q = gaussian(rng, n, n).qr().q();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| {
        (rng.random::<f64>() * 2.0 - 1.0) * spread
    }).map(f64::exp));
    let m = &q * d * q.transpose();
    SpdMatrix::new((&m + m.transpose()) * 0.5).unwrap()
}

/// Affine-invariant distance from the eigenvalues of `P1⁻¹ P2`, a similar
/// (non-symmetric) matrix with the same spectrum as the whitened form.
pub fn distance_oracle(p1: &SpdMatrix, p2: &SpdMatrix) -> f64 {
    let m = p1.as_matrix().clone().try_inverse().unwrap() * p2.as_matrix();
    m.complex_eigenvalues().iter().map(|l| l.re.ln().powi(2)).sum::<f64>().sqrt()
}

/// `P1^{1/2} (P1^{-1/2} P2 P1^{-1/2})^{1/2} P1^{1/2}`, the geodesic midpoint.
pub fn midpoint_oracle(p1: &SpdMatrix, p2: &SpdMatrix) -> DMatrix<f64> {
    let pow = |m: &DMatrix<f64>, e: f64| {
        let eig = m.clone().symmetric_eigen();
        let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.powf(e)));
        &eig.eigenvectors * d * eig.eigenvectors.transpose()
    };
    let s = pow(p1.as_matrix(), 0.5);
    let is = pow(p1.as_matrix(), -0.5);
    let inner = &is * p2.as_matrix() * &is;
    let inner = (&inner + inner.transpose()) * 0.5;
    &s * pow(&inner, 0.5) * &s
}

/// The augmented covariance assembled block by block from lagged sums:
/// block `(a, b)` is `(1/(N−1)) Σ_j x_{j+aτ} x_{j+bτ}ᵀ` over the `N`
/// complete delay vectors.
pub fn lag_block_oracle(x: &DMatrix<f64>, order: usize, lag: usize) -> DMatrix<f64> {
    let (d, t) = (x.nrows(), x.ncols());
    let n = t - (order - 1) * lag;
    let mut out = DMatrix::zeros(d * order, d * order);
    for a in 0..order {
        for b in 0..order {
            for j in 0..n {
                for r in 0..d {
                    for c in 0..d {
                        out[(a * d + r, b * d + c)] += x[(r, j + a * lag)] * x[(c, j + b * lag)];
                    }
                }
            }
        }
    }
    out / (n as f64 - 1.0)
}

/// Ledoit-Wolf intensity straight from its definition for `C = Y Yᵀ/(m−1)`:
/// `μ = Tr C/n`, `d² = ‖C − μI‖²`, `b̄² = (1/m²) Σ_k ‖y_k y_kᵀ − C‖²`,
/// `λ = min(b̄², d²)/d²`.
pub fn ledoit_wolf_oracle(y: &DMatrix<f64>) -> f64 {
    let (n, m) = (y.nrows(), y.ncols());
    let c = y * y.transpose() / (m as f64 - 1.0);
    let mu = c.trace() / n as f64;
    let d2 = (&c - DMatrix::identity(n, n) * mu).norm_squared();
    let mut b2 = 0.0;
    for k in 0..m {
        let yk = y.column(k);
        b2 += (yk * yk.transpose() - &c).norm_squared();
    }
    b2 /= (m * m) as f64;
    if d2 == 0.0 {
        return 0.0;
    }
    b2.min(d2) / d2
}

/// Fraction of (positive, negative) pairs where the positive scores higher,
/// ties counting one half.
pub fn auc_oracle(scores: &[f64], labels: &[usize]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                den += 1.0;
                num += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / den
}

/// Exact one-tailed Wilcoxon p by listing all `2ⁿ` sign assignments of the
/// mid-ranks of `|d|`.
pub fn wilcoxon_enumeration(diffs: &[f64]) -> f64 {
    let d: Vec<f64> = diffs.iter().copied().filter(|v| *v != 0.0).collect();
    let n = d.len();
    let ranks: Vec<f64> = d
        .iter()
        .map(|v| {
            let below = d.iter().filter(|w| w.abs() < v.abs()).count() as f64;
            let equal = d.iter().filter(|w| w.abs() == v.abs()).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let mut count = 0usize;
    for mask in 0..(1usize << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w >= observed - 1e-9 {
            count += 1;
        }
    }
    count as f64 / (1usize << n) as f64
}

/// Matched-covariance two-class dataset: spatial covariance `0.5^|i−j|`,
/// `A₁ = ±ρI`.
pub fn matched_dataset(d: usize, n_samples: usize, per_class: usize, rho: f64, seed: u64) -> EpochSet {
    let sigma = DMatrix::from_fn(d, d, |i, j| 0.5f64.powi(i.abs_diff(j) as i32));
    let mut spec = ArSpec::matched_covariance_pair(&sigma, rho, n_samples, per_class, seed);
    spec.subject = format!("subject{seed}");
    generate_ar_dataset(&spec).unwrap()
}

pub fn epoch_from(m: DMatrix<f64>) -> Epoch {
    Epoch::new(m, 250.0).unwrap()
}
