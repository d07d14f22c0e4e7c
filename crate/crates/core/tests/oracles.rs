//! Library results against independent reference computations.

mod common;

use acm::covariance::{lagged_covariances, ledoit_wolf, sample_covariance, yule_walker_solve, Epoch};
use acm::data::{generate_ar_dataset, ArClass, ArSpec};
use acm::eval::{
    auc_roc, bonferroni, permutation_paired_mean, permutation_paired_t, stouffer_combine, wilcoxon_signed_rank,
    wilcoxon_signed_rank_with, WilcoxonMethod,
};
use acm::spd::{distance, frechet_mean, SpdMatrix, FRECHET_MAX_ITER, FRECHET_TOL};
use common::*;
use nalgebra::DMatrix;
use rand::Rng;

#[test]
fn auc_matches_pairwise_count() {
    let mut r = rng(1);
    for case in 0..100 {
        let n = r.random_range(4..80);
        // Coarse scores force plenty of ties.
        let coarse = case % 3 == 0;
        let mut labels: Vec<usize> = (0..n).map(|_| r.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                let v: f64 = r.random::<f64>() * 4.0 - 2.0;
                if coarse { v.round() } else { v }
            })
            .collect();
        let auc = auc_roc(&scores, &labels).unwrap();
        assert!((auc - auc_oracle(&scores, &labels)).abs() < 1e-12, "case {case}");
    }
}

#[test]
fn wilcoxon_exact_matches_enumeration() {
    let mut r = rng(2);
    for case in 0..60 {
        let n = r.random_range(5..=12);
        let ties = case % 2 == 0;
        let d: Vec<f64> = (0..n)
            .map(|_| {
                let v: f64 = r.random::<f64>() * 2.0 - 0.7;
                if ties { (v * 4.0).round() / 4.0 + 0.125 } else { v }
            })
            .collect();
        if d.iter().filter(|v| **v != 0.0).count() < 5 {
            continue;
        }
        let p = wilcoxon_signed_rank_with(&d, WilcoxonMethod::Exact).unwrap();
        assert!((p - wilcoxon_enumeration(&d)).abs() < 1e-12, "case {case}: {d:?}");
    }
}

#[test]
fn wilcoxon_anchor_values() {
    let all_positive = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
    assert!((wilcoxon_signed_rank(&all_positive).unwrap() - 1.0 / 64.0).abs() < 1e-15);
    let symmetric = [0.1, -0.1, 0.2, -0.2, 0.3, -0.3];
    assert!(wilcoxon_signed_rank(&symmetric).unwrap() >= 0.5);
}

#[test]
fn wilcoxon_normal_tracks_exact_at_twelve_pairs() {
    let mut r = rng(3);
    for _ in 0..50 {
        let d: Vec<f64> = (0..12).map(|_| r.random::<f64>() - 0.3).collect();
        let exact = wilcoxon_signed_rank_with(&d, WilcoxonMethod::Exact).unwrap();
        let normal = wilcoxon_signed_rank_with(&d, WilcoxonMethod::Normal).unwrap();
        assert!((exact - normal).abs() < 0.02, "{exact} vs {normal}");
    }
}

/// `count / 2ⁿ` of sign assignments whose statistic reaches the observed one.
fn sign_flip_enumeration(d: &[f64], stat: impl Fn(&[f64]) -> f64) -> f64 {
    let n = d.len();
    let observed = stat(d);
    let mut hits = 0;
    for mask in 0..1usize << n {
        let f: Vec<f64> = (0..n).map(|i| if mask >> i & 1 == 1 { -d[i] } else { d[i] }).collect();
        if stat(&f) >= observed - 1e-12 * observed.abs().max(1.0) {
            hits += 1;
        }
    }
    hits as f64 / (1usize << n) as f64
}

fn t_stat(d: &[f64]) -> f64 {
    let n = d.len() as f64;
    let m = d.iter().sum::<f64>() / n;
    let sd = (d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    m / (sd / n.sqrt())
}

#[test]
fn permutation_tests_match_enumeration() {
    assert_eq!(permutation_paired_t(&[0.1, 0.2, 0.3, 0.4], 10_000, 0).unwrap(), 1.0 / 16.0);
    let mut r = rng(4);
    for _ in 0..30 {
        let n = r.random_range(3..=9);
        let d: Vec<f64> = (0..n).map(|_| r.random::<f64>() - 0.4).collect();
        let t = permutation_paired_t(&d, 10_000, 0).unwrap();
        assert!((t - sign_flip_enumeration(&d, t_stat)).abs() < 1e-12);
        let m = permutation_paired_mean(&d, 10_000, 0).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!((m - sign_flip_enumeration(&d, mean)).abs() < 1e-12);
    }
}

#[test]
fn stouffer_and_bonferroni_closed_forms() {
    let p = stouffer_combine(&[0.05, 0.05], None).unwrap();
    assert!((p - 0.0101).abs() < 2e-4, "{p}");
    // Equal weights of any size leave the result unchanged.
    let w = stouffer_combine(&[0.05, 0.05], Some(&[3.0, 3.0])).unwrap();
    assert!((w - p).abs() < 1e-12);
    assert_eq!(bonferroni(0.3, 6), 1.0);
    assert!((bonferroni(0.01, 6) - 0.06).abs() < 1e-15);
}

#[test]
fn frechet_mean_of_two_is_the_midpoint() {
    let mut r = rng(5);
    for n in 2..=8 {
        let (a, b) = (random_spd(&mut r, n, 1.5), random_spd(&mut r, n, 1.5));
        let mean = frechet_mean(&[a.clone(), b.clone()], FRECHET_TOL, FRECHET_MAX_ITER).unwrap();
        let oracle = midpoint_oracle(&a, &b);
        assert!((mean.as_matrix() - &oracle).amax() < 1e-8, "n {n}");
        let half = distance(&a, &b).unwrap() / 2.0;
        assert!((distance(&a, &mean).unwrap() - half).abs() < 1e-8);
    }
}

#[test]
fn frechet_mean_of_commuting_matrices_is_log_euclidean() {
    let diag = |v: &[f64]| SpdMatrix::from_diagonal(v).unwrap();
    let mats = [diag(&[1.0, 4.0]), diag(&[4.0, 0.25]), diag(&[2.0, 2.0])];
    let mean = frechet_mean(&mats, FRECHET_TOL, FRECHET_MAX_ITER).unwrap();
    let expected = [(1.0f64 * 4.0 * 2.0).cbrt(), (4.0f64 * 0.25 * 2.0).cbrt()];
    assert!((mean.as_matrix()[(0, 0)] - expected[0]).abs() < 1e-9);
    assert!((mean.as_matrix()[(1, 1)] - expected[1]).abs() < 1e-9);
    assert!(mean.as_matrix()[(0, 1)].abs() < 1e-12);
}

#[test]
fn ledoit_wolf_matches_definition_when_rank_deficient() {
    let mut r = rng(6);
    for case in 0..100 {
        let n = r.random_range(2..=12);
        let m = r.random_range(2..=n + 1);
        let y = gaussian(&mut r, n, m);
        let c = &y * y.transpose() / (m as f64 - 1.0);
        let (shrunk, lambda) = ledoit_wolf(&c, &y).unwrap();
        let oracle = ledoit_wolf_oracle(&y);
        assert!((lambda - oracle).abs() < 1e-10, "case {case}: {lambda} vs {oracle}");
        assert!((0.0..=1.0).contains(&lambda));
        assert!(shrunk.eigenvalues().min() > 0.0);
    }
}

fn ar2_class() -> ArClass {
    let a1 = DMatrix::from_row_slice(3, 3, &[0.5, 0.1, 0.0, 0.0, 0.4, 0.1, 0.1, 0.0, 0.3]);
    let a2 = DMatrix::from_row_slice(3, 3, &[-0.2, 0.0, 0.05, 0.0, -0.1, 0.0, 0.05, 0.0, -0.15]);
    let u = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 1.0, 0.1, 0.0, 0.1, 0.5]);
    ArClass::new("ar2", &[a1, a2], &u)
}

fn single_epoch(class: ArClass, n_samples: usize, seed: u64) -> Epoch {
    let spec = ArSpec {
        subject: "yw".into(),
        sample_rate: 250.0,
        lag: 1,
        n_samples,
        epochs_per_class: 1,
        n_sessions: 1,
        seed,
        classes: vec![class],
    };
    generate_ar_dataset(&spec).unwrap().epochs().next().unwrap().clone()
}

fn yule_walker_error(n_samples: usize, seed: u64) -> f64 {
    let class = ar2_class();
    let truth = class.coefficient_matrices().unwrap();
    let x = single_epoch(class, n_samples, seed);
    let fit = yule_walker_solve(&lagged_covariances(&x, 2).unwrap(), 2).unwrap();
    fit.coefficients
        .iter()
        .zip(&truth)
        .map(|(a, b)| (a - b).amax())
        .fold(0.0, f64::max)
}

#[test]
fn yule_walker_recovers_ar2() {
    let seeds = 0..8u64;
    let long: Vec<f64> = seeds.clone().map(|s| yule_walker_error(20_000, s)).collect();
    let short: Vec<f64> = seeds.map(|s| yule_walker_error(2_000, s)).collect();
    assert!(long.iter().all(|&e| e < 0.05), "{long:?}");
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&long) <= 0.5 * mean(&short), "{long:?} vs {short:?}");
}

#[test]
fn yule_walker_is_exact_on_population_moments() {
    // Γ(1) = A Γ(0) and Γ(2) = A Γ(1) for an AR(1); the solver must return
    // A and U = Γ(0) − A Γ(0) Aᵀ exactly up to rounding.
    let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.2, -0.1, 0.3]);
    let g0 = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
    let g1 = &a * &g0;
    let fit = yule_walker_solve(&[g0.clone(), g1], 1).unwrap();
    assert!((&fit.coefficients[0] - &a).amax() < 1e-12);
    let u = &g0 - &a * &g0 * a.transpose();
    assert!((&fit.innovation_cov - u).amax() < 1e-12);
}

#[test]
fn generator_reaches_its_stationary_covariance() {
    // For A = ρI and U = (1 − ρ²)Σ the stationary lag-0 covariance is Σ.
    let sigma = DMatrix::from_fn(4, 4, |i, j| 0.5f64.powi(i.abs_diff(j) as i32));
    let error = |n_samples: usize| -> f64 {
        (0..8u64)
            .map(|seed| {
                let spec = ArSpec::matched_covariance_pair(&sigma, 0.8, n_samples, 1, seed);
                let set = generate_ar_dataset(&spec).unwrap();
                let x = set.epochs().next().unwrap();
                (sample_covariance(x).unwrap().as_matrix() - &sigma).norm()
            })
            .sum::<f64>()
            / 8.0
    };
    let (short, long) = (error(2_000), error(20_000));
    assert!(long <= 0.5 * short, "{long} vs {short}");
    assert!(long < 0.1, "{long}");
}

#[test]
fn matched_classes_differ_only_in_dynamics() {
    use acm::covariance::{augmented_covariance, AugmentedParams};
    let set = matched_dataset(4, 512, 100, 0.8, 11);
    let labels: Vec<usize> = set.labels().collect();
    let class_mean = |params: Option<AugmentedParams>, class: usize| {
        let covs: Vec<SpdMatrix> = set
            .epochs()
            .zip(&labels)
            .filter(|(_, &l)| l == class)
            .map(|(e, _)| match params {
                Some(p) => augmented_covariance(e, p, false).unwrap(),
                None => sample_covariance(e).unwrap(),
            })
            .collect();
        frechet_mean(&covs, FRECHET_TOL, FRECHET_MAX_ITER).unwrap()
    };
    let plain = distance(&class_mean(None, 0), &class_mean(None, 1)).unwrap();
    let params = AugmentedParams::new(2, 1).unwrap();
    let augmented = distance(&class_mean(Some(params), 0), &class_mean(Some(params), 1)).unwrap();
    assert!(plain < 0.1, "{plain}");
    assert!(augmented > 0.5, "{augmented}");
}
