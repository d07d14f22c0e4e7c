//! Tangent-space features at the Fréchet mean of the training covariances,
//! classified by a support-vector machine.

use acm::classifiers::{covariances, Kernel, ShrinkPolicy, SvmModel, SvmParams, TangentMap};
use acm::covariance::{AugmentedParams, Epoch};
use acm::data::{generate_ar_dataset, ArSpec};
use acm::eval::{accuracy, auc_roc};
use nalgebra::DMatrix;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sigma = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { 0.3 });
    let train = generate_ar_dataset(&ArSpec::matched_covariance_pair(&sigma, 0.6, 256, 40, 11))?;
    let test = generate_ar_dataset(&ArSpec::matched_covariance_pair(&sigma, 0.6, 256, 40, 12))?;
    let params = AugmentedParams::new(2, 1)?;
    let train_covs = covariances(&train.epochs().collect::<Vec<&Epoch>>(), params, ShrinkPolicy::Auto)?;
    let test_covs = covariances(&test.epochs().collect::<Vec<&Epoch>>(), params, ShrinkPolicy::Auto)?;
    let train_labels: Vec<usize> = train.labels().collect();
    let test_labels: Vec<usize> = test.labels().collect();

    let map = TangentMap::fit(&train_covs)?;
    let features = |covs: &[acm::spd::SpdMatrix]| covs.iter().map(|c| map.transform(c)).collect::<Result<Vec<_>, _>>();
    let (x_train, x_test) = (features(&train_covs)?, features(&test_covs)?);
    println!("{} covariances of size {} → {} features", train_covs.len(), map.dim(), map.output_len());

    for kernel in [Kernel::Linear, Kernel::Rbf] {
        let svm = SvmModel::fit(&x_train, &train_labels, 2, &SvmParams::new(1.0, kernel))?;
        let scores = x_test.iter().map(|x| svm.score(x)).collect::<Result<Vec<_>, _>>()?;
        let predicted = x_test.iter().map(|x| svm.predict(x)).collect::<Result<Vec<_>, _>>()?;
        println!(
            "{:>6} kernel: AUC {:.3}, accuracy {:.3}, {} support vectors",
            kernel.name(),
            auc_roc(&scores, &test_labels)?,
            accuracy(&predicted, &test_labels)?,
            svm.support()[0].0.len()
        );
    }
    Ok(())
}
