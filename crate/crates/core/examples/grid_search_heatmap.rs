//! Nested grid search over order and lag with the score map written as CSV
//! and rendered to SVG.
//!
//! Run with an output directory: `cargo run --example grid_search_heatmap -- out/`.

use std::path::PathBuf;

use acm::classifiers::{grid_search, GridDomain, PipelineKind, ShrinkPolicy};
use acm::cli::render_svg;
use acm::covariance::Epoch;
use acm::data::{generate_ar_dataset, ArClass, ArSpec};
use nalgebra::DMatrix;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "grid_example".into()));
    std::fs::create_dir_all(&out)?;

    // The classes differ only in the sign of their lag-3 dependence, so
    // lags that are multiples of 3 separate them.
    let a = DMatrix::<f64>::identity(2, 2) * 0.7;
    let u = DMatrix::<f64>::identity(2, 2) * 0.51;
    let spec = ArSpec {
        subject: "grid".into(),
        sample_rate: 250.0,
        lag: 3,
        n_samples: 256,
        epochs_per_class: 30,
        n_sessions: 1,
        seed: 5,
        classes: vec![ArClass::new("up", &[a.clone()], &u), ArClass::new("down", &[-a], &u)],
    };
    let set = generate_ar_dataset(&spec)?;
    let epochs: Vec<&Epoch> = set.epochs().collect();
    let labels: Vec<usize> = set.labels().collect();

    let domain = GridDomain::for_pipeline(PipelineKind::AcmMdm, 4, 6)?;
    let result = grid_search(&epochs, &labels, 2, &domain, 5, 0, ShrinkPolicy::Auto)?;
    println!(
        "best order {} lag {}: inner AUC {:.3} ({} tied cells)",
        result.params.order,
        result.params.lag,
        result.best_score,
        result.ties.len()
    );

    let mut csv = Vec::new();
    result.write_csv(&mut csv)?;
    std::fs::write(out.join("grid.csv"), csv)?;
    let (orders, lags, rows) = result.order_lag_map();
    std::fs::write(out.join("grid.svg"), render_svg("ACM+MDM inner AUC", &orders, &lags, &rows))?;
    for (order, row) in orders.iter().zip(&rows) {
        let cells: Vec<String> = row.iter().map(|c| c.map_or("  -  ".into(), |s| format!("{s:.2}"))).collect();
        println!("order {order}: {}", cells.join(" "));
    }
    println!("wrote {}/grid.csv and grid.svg", out.display());
    Ok(())
}
