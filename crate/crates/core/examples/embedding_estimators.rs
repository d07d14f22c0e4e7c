//! Delay and dimension estimation on sinusoids: mutual information picks the
//! lag, Cao's method the dimension, and MDOP both at once.

use acm::data::sine_dataset;
use acm::embedding::{cao_embedding_dimension, estimate_mdop, select_tau_ami, MdopConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let period = 64.0;
    let set = sine_dataset(2, 512, period, 10, 0.1, 1)?;

    let tau = select_tau_ami(&set, 32, 16)?;
    println!("AMI first minimum: τ = {} (quarter period {})", tau.tau, period / 4.0);
    for (lag, mi) in tau.curve.iter().enumerate().take(20) {
        println!("  lag {lag:2}  {mi:8.3}");
    }

    let clean = sine_dataset(2, 512, period, 4, 0.0, 1)?;
    let cao = cao_embedding_dimension(&clean, 16, 10, 0.05)?;
    println!("Cao at τ = 16: D = {} (E1 = {:.3?})", cao.dim, &cao.e1[..4]);

    let mdop = estimate_mdop(&clean, &MdopConfig { max_lag: 32, ..MdopConfig::default() })?;
    println!("MDOP: τ = {}, D = {}, terminated = {}", mdop.tau, mdop.dim, mdop.is_clean());
    Ok(())
}
