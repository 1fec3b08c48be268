//! Poisson intensity MLE on the shipped monthly disaster-count series.
//!
//! Run with: `cargo run --release --example estimate_intensity`

use timberlease::intensity::{estimate_intensity, lambda_ci_to_box_segment, DisasterCounts, LAMBDA_FLOOR};

fn main() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/wildfire_counts.csv");
    let counts = match DisasterCounts::read_csv(&path, false) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}\nrun `cargo run --release --example make_synthetic_data` first");
            std::process::exit(2);
        }
    };
    let est = estimate_intensity(&counts).unwrap();
    println!(
        "{} events over {:.2} years ({} monthly periods)",
        est.total_events,
        est.total_years,
        counts.counts.len()
    );
    println!("lambda_hat = {:.4} events/year", est.lambda_hat);
    println!("std error  = {:.4}  (sqrt(lambda/years) from the Fisher information)", est.std_error);
    let (lo, hi) = lambda_ci_to_box_segment(&est, LAMBDA_FLOOR);
    println!("95% CI     = [{:.4}, {:.4}]  -> intensity segment of the uncertainty box", lo, hi);
}
