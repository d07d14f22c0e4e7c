//! Writing, reading and filtering epoch containers.

use acm::data::{generate_ar_dataset, read_epochset_from, write_epochset_to, ArSpec, FORMAT_NAME};
use nalgebra::DMatrix;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut spec = ArSpec::matched_covariance_pair(&DMatrix::identity(2, 2), 0.5, 500, 4, 3);
    spec.n_sessions = 2;
    let set = generate_ar_dataset(&spec)?;

    let mut bytes = Vec::new();
    write_epochset_to(&set, &mut bytes)?;
    let header_end = bytes.iter().position(|&b| b == b'\n').expect("manifest line");
    println!("{FORMAT_NAME} container: {} bytes", bytes.len());
    println!("manifest: {}", String::from_utf8_lossy(&bytes[..header_end]));

    let back = read_epochset_from(bytes.as_slice())?;
    println!("round trip identical: {}", back == set);

    let filtered = set.bandpass(8.0, 30.0)?;
    let x = filtered.epochs().next().expect("epochs").channel(0);
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    println!("8-30 Hz band-pass: first channel mean {mean:.2e}");

    println!("spec JSON accepted by `acm simulate --spec`:\n{}", serde_json::to_string_pretty(&spec)?);
    Ok(())
}
