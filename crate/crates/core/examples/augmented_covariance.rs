//! The augmented covariance of an epoch is the covariance of its delay
//! embedding. Shown here with shrinkage and with the Yule-Walker view of the
//! same lag blocks.

use acm::covariance::{
    augmented_covariance, embed_epoch, lagged_covariances, ledoit_wolf_intensity, sample_covariance,
    yule_walker_solve, AugmentedParams,
};
use acm::data::{generate_ar_dataset, ArClass, ArSpec};
use nalgebra::DMatrix;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A stable two-channel AR(2) process.
    let a1 = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, -0.2, 0.4]);
    let a2 = DMatrix::from_row_slice(2, 2, &[-0.3, 0.0, 0.1, -0.2]);
    let spec = ArSpec {
        subject: "demo".into(),
        sample_rate: 250.0,
        lag: 1,
        n_samples: 20_000,
        epochs_per_class: 1,
        n_sessions: 1,
        seed: 7,
        classes: vec![ArClass::new("ar2", &[a1.clone(), a2.clone()], &DMatrix::identity(2, 2))],
    };
    let set = generate_ar_dataset(&spec)?;
    let x = set.epochs().next().expect("one epoch");

    let params = AugmentedParams::new(3, 2)?;
    let embedded = embed_epoch(x, params)?;
    println!("epoch {}×{} → embedded {}×{}", x.channels(), x.samples(), embedded.channels(), embedded.samples());
    let direct = augmented_covariance(x, params, false)?;
    let via_embedding = sample_covariance(&embedded)?;
    println!(
        "augmented vs covariance of embedding: max |Δ| = {:.2e}",
        (direct.as_matrix() - via_embedding.as_matrix()).amax()
    );
    let lambda = ledoit_wolf_intensity(via_embedding.as_matrix(), embedded.data());
    println!("Ledoit-Wolf intensity on 20000 samples: {lambda:.2e}");

    let gammas = lagged_covariances(x, 2)?;
    let fit = yule_walker_solve(&gammas, 2)?;
    println!("A1 estimate:\n{:.3}", fit.coefficients[0]);
    println!("A2 estimate:\n{:.3}", fit.coefficients[1]);
    let err = (&fit.coefficients[0] - &a1).amax().max((&fit.coefficients[1] - &a2).amax());
    println!("max coefficient error: {err:.4}");
    Ok(())
}
