//! Within-session evaluation of a plain and an augmented pipeline over
//! several subjects, followed by the paired comparison of the two.

use acm::classifiers::PipelineKind;
use acm::data::{generate_ar_dataset, ArSpec};
use acm::eval::{meta_analysis, within_session_eval, EvalOptions, MetaOptions, ParamSource, PipelineSpec};
use nalgebra::DMatrix;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sigma = DMatrix::from_fn(3, 3, |i, j| 0.4f64.powi(i.abs_diff(j) as i32));
    let subjects = (0..6)
        .map(|s| {
            let mut spec = ArSpec::matched_covariance_pair(&sigma, 0.5, 256, 20, 100 + s);
            spec.subject = format!("subject{s}");
            generate_ar_dataset(&spec)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let pipelines = [
        PipelineSpec::grid(PipelineKind::Mdm),
        PipelineSpec::new(PipelineKind::AcmMdm, ParamSource::Grid),
    ];
    let opts = EvalOptions {
        dataset: "matched".into(),
        seed: 42,
        grid_max_order: 3,
        grid_max_lag: 3,
        ..EvalOptions::default()
    };
    let report = within_session_eval(&subjects, &pipelines, &opts)?;
    for s in &report.summary {
        println!("{:>16}: AUC {:.3} ± {:.3} over {} subjects", s.pipeline, s.mean, s.std, s.n_subjects);
    }
    for (p, t) in report.timing_by_pipeline() {
        println!("{p:>16}: {:.3} s total ({:.3} s grid search)", t.total(), t.grid_search);
    }

    let meta = meta_analysis(&[report], &MetaOptions::default())?;
    for h in &meta.hypotheses {
        println!(
            "{:<28} p = {:.4} (corrected {:.4}, {}), Cohen's d = {:?}",
            h.hypothesis, h.p_combined, h.p_corrected, h.datasets[0].test, h.smd
        );
    }
    Ok(())
}
