//! Minimum distance to the Riemannian class means, on two classes whose
//! spatial covariances are identically distributed. Plain covariances carry
//! no class information; augmented ones expose the lag-1 dynamics.

use acm::classifiers::{covariances, MdmModel, ShrinkPolicy};
use acm::covariance::{AugmentedParams, Epoch};
use acm::data::{generate_ar_dataset, ArSpec};
use acm::eval::auc_roc;
use nalgebra::DMatrix;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sigma = DMatrix::from_fn(4, 4, |i, j| 0.5f64.powi(i.abs_diff(j) as i32));
    let train = generate_ar_dataset(&ArSpec::matched_covariance_pair(&sigma, 0.8, 512, 50, 1))?;
    let test = generate_ar_dataset(&ArSpec::matched_covariance_pair(&sigma, 0.8, 512, 50, 2))?;
    let train_epochs: Vec<&Epoch> = train.epochs().collect();
    let test_epochs: Vec<&Epoch> = test.epochs().collect();
    let train_labels: Vec<usize> = train.labels().collect();
    let test_labels: Vec<usize> = test.labels().collect();

    for (name, params) in [("plain covariance", AugmentedParams::PLAIN), ("order 2, lag 1", AugmentedParams::new(2, 1)?)] {
        let fit = covariances(&train_epochs, params, ShrinkPolicy::Auto)?;
        let model = MdmModel::fit(&fit, &train_labels, 2)?;
        let scores = covariances(&test_epochs, params, ShrinkPolicy::Auto)?
            .iter()
            .map(|c| model.score(c))
            .collect::<Result<Vec<_>, _>>()?;
        println!("{name:>18}: test AUC = {:.3}", auc_roc(&scores, &test_labels)?);
    }
    Ok(())
}
