//! Pairwise comparison of pipelines across evaluation reports.
//!
//! Each report belongs to a dataset (its `dataset` field). Within a dataset
//! every pipeline is an arm, and every ordered pair of arms is a hypothesis
//! "A > B" tested on per-subject score differences. Datasets are combined
//! with Stouffer's method and the combined p is Bonferroni-corrected over
//! the hypotheses.

use serde::Serialize;

use super::{
    bonferroni, cohen_d, derive_seed, hash_str, permutation_paired_mean, permutation_paired_t, stouffer_combine,
    wilcoxon_signed_rank, EvalError, EvalReport, Result,
};

/// Subjects per dataset from which the Wilcoxon test replaces the
/// permutation t-test.
pub const WILCOXON_MIN_SUBJECTS: usize = 20;

/// p-values are clamped to `[P_CLAMP, 1 − P_CLAMP]` before combination so
/// the normal quantile stays finite.
const P_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetaOptions {
    pub n_perm: usize,
    pub seed: u64,
}

impl Default for MetaOptions {
    fn default() -> Self {
        MetaOptions { n_perm: 10_000, seed: 0 }
    }
}

/// Outcome of one hypothesis on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetTest {
    pub dataset: String,
    pub n_subjects: usize,
    /// `wilcoxon`, `permutation_t`, `permutation_mean`, or `none` when
    /// every difference is zero (p is then 0.5).
    pub test: &'static str,
    pub p: f64,
    pub mean_diff: f64,
    /// Cohen's d of the paired differences.
    pub cohen_d: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisResult {
    /// `"A > B"`.
    pub hypothesis: String,
    pub better: String,
    pub baseline: String,
    pub datasets: Vec<DatasetTest>,
    /// Per-dataset p-values in `datasets` order.
    pub p_raw: Vec<f64>,
    /// Stouffer combination with √n_subjects weights, before correction.
    pub p_combined: f64,
    pub p_corrected: f64,
    /// √n_subjects-weighted mean of the per-dataset Cohen's d.
    pub smd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetaAnalysis {
    /// Bonferroni factor: the number of hypotheses.
    pub correction_factor: usize,
    pub hypotheses: Vec<HypothesisResult>,
}

impl MetaAnalysis {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("meta-analysis serializes");
        s.push('\n');
        s
    }
}

/// One pipeline of one report, named uniquely within its dataset.
struct Arm<'a> {
    name: String,
    report: &'a EvalReport,
    pipeline: &'a str,
}

struct Dataset<'a> {
    name: String,
    arms: Vec<Arm<'a>>,
}

fn group(reports: &[EvalReport]) -> Vec<Dataset<'_>> {
    let mut datasets: Vec<Dataset> = Vec::new();
    for report in reports {
        let idx = match datasets.iter().position(|d| d.name == report.dataset) {
            Some(i) => i,
            None => {
                datasets.push(Dataset {
                    name: report.dataset.clone(),
                    arms: Vec::new(),
                });
                datasets.len() - 1
            }
        };
        let ds = &mut datasets[idx];
        for pipeline in &report.pipelines {
            let repeats = ds.arms.iter().filter(|a| a.pipeline == pipeline).count();
            let name = if repeats == 0 {
                pipeline.clone()
            } else {
                format!("{pipeline} #{}", repeats + 1)
            };
            ds.arms.push(Arm { name, report, pipeline });
        }
    }
    datasets
}

fn check_pairing(ds: &Dataset) -> Result<()> {
    let first = &ds.arms[0];
    for arm in &ds.arms[1..] {
        let violation = |what: String| {
            Err(EvalError::PairingViolation(format!(
                "dataset {}: {} and {} {what}",
                ds.name, first.name, arm.name
            )))
        };
        if arm.report.evaluation != first.report.evaluation {
            return violation("use different evaluations".into());
        }
        if arm.report.metric != first.report.metric {
            return violation("use different metrics".into());
        }
        if arm.report.subjects != first.report.subjects {
            return violation(format!(
                "cover different subjects ({:?} vs {:?})",
                first.report.subjects, arm.report.subjects
            ));
        }
        if arm.report.session_keys(arm.pipeline) != first.report.session_keys(first.pipeline) {
            return violation("cover different sessions".into());
        }
        let splits = |a: &Arm| -> Vec<(String, String, String)> {
            a.report
                .splits
                .iter()
                .filter(|r| r.pipeline == a.pipeline)
                .map(|r| (r.subject.clone(), r.session.clone(), r.split.clone()))
                .collect()
        };
        if splits(arm) != splits(first) {
            return violation("cover different splits".into());
        }
    }
    Ok(())
}

fn test_dataset(dataset: &str, diffs: &[f64], seed: u64, opts: &MetaOptions) -> Result<DatasetTest> {
    let n = diffs.len();
    let (test, p) = if diffs.iter().all(|&d| d == 0.0) {
        ("none", 0.5)
    } else {
        let primary = if n >= WILCOXON_MIN_SUBJECTS {
            wilcoxon_signed_rank(diffs).map(|p| ("wilcoxon", p))
        } else {
            permutation_paired_t(diffs, opts.n_perm, seed).map(|p| ("permutation_t", p))
        };
        match primary {
            Err(EvalError::TooFewPairs { .. } | EvalError::DegenerateVariance) => {
                ("permutation_mean", permutation_paired_mean(diffs, opts.n_perm, seed)?)
            }
            other => other?,
        }
    };
    Ok(DatasetTest {
        dataset: dataset.to_string(),
        n_subjects: n,
        test,
        p,
        mean_diff: diffs.iter().sum::<f64>() / n as f64,
        cohen_d: cohen_d(diffs),
    })
}

/// Every ordered pair of arms that share at least one dataset, tested per
/// dataset on subject-mean score differences.
pub fn meta_analysis(reports: &[EvalReport], opts: &MetaOptions) -> Result<MetaAnalysis> {
    if opts.n_perm == 0 {
        return Err(EvalError::InvalidInput("n_perm must be positive".into()));
    }
    let datasets = group(reports);
    datasets.iter().try_for_each(check_pairing)?;
    let mut names: Vec<&str> = Vec::new();
    for arm in datasets.iter().flat_map(|d| &d.arms) {
        if !names.contains(&arm.name.as_str()) {
            names.push(&arm.name);
        }
    }
    if names.len() < 2 {
        return Err(EvalError::InvalidInput("need at least two pipelines to compare".into()));
    }

    let mut hypotheses = Vec::new();
    for &better in &names {
        for &baseline in &names {
            if better == baseline {
                continue;
            }
            let hypothesis = format!("{better} > {baseline}");
            let mut tests = Vec::new();
            for ds in &datasets {
                let find = |name: &str| ds.arms.iter().find(|a| a.name == name);
                let (Some(a), Some(b)) = (find(better), find(baseline)) else { continue };
                let sa = a.report.subject_scores(a.pipeline).expect("arm pipeline in report");
                let sb = b.report.subject_scores(b.pipeline).expect("arm pipeline in report");
                let diffs: Vec<f64> = sa.iter().zip(&sb).map(|((_, x), (_, y))| x - y).collect();
                let seed = derive_seed(opts.seed, &[hash_str(&hypothesis), hash_str(&ds.name)]);
                tests.push(test_dataset(&ds.name, &diffs, seed, opts)?);
            }
            if tests.is_empty() {
                continue;
            }
            let p_raw: Vec<f64> = tests.iter().map(|t| t.p).collect();
            let p_combined = if tests.len() == 1 {
                p_raw[0]
            } else {
                let clamped: Vec<f64> = p_raw.iter().map(|p| p.clamp(P_CLAMP, 1.0 - P_CLAMP)).collect();
                let weights: Vec<f64> = tests.iter().map(|t| (t.n_subjects as f64).sqrt()).collect();
                stouffer_combine(&clamped, Some(&weights))?
            };
            let weighted: Vec<(f64, f64)> = tests
                .iter()
                .filter_map(|t| t.cohen_d.map(|d| ((t.n_subjects as f64).sqrt(), d)))
                .collect();
            let smd = (!weighted.is_empty()).then(|| {
                weighted.iter().map(|(w, d)| w * d).sum::<f64>() / weighted.iter().map(|(w, _)| w).sum::<f64>()
            });
            hypotheses.push(HypothesisResult {
                hypothesis,
                better: better.to_string(),
                baseline: baseline.to_string(),
                datasets: tests,
                p_raw,
                p_combined,
                p_corrected: 0.0,
                smd,
            });
        }
    }
    let m = hypotheses.len();
    hypotheses.iter_mut().for_each(|h| h.p_corrected = bonferroni(h.p_combined, m));
    Ok(MetaAnalysis {
        correction_factor: m,
        hypotheses,
    })
}
