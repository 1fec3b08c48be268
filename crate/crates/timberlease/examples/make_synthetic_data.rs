//! Regenerates the synthetic datasets shipped under `data/`:
//!
//! - `lumber_futures_synthetic.csv`: a 1520-date weekly futures panel drawn
//!   exactly from the state-space model at the reference parameters, for
//!   exercising the estimation pipeline end to end;
//! - `wildfire_counts.csv`: a monthly disaster-count series (May 1953 to
//!   May 2024, 17 events) whose closed-form intensity estimate matches the
//!   reference values used throughout.
//!
//! Run with: `cargo run --release --example make_synthetic_data`

use timberlease::intensity::DisasterCounts;
use timberlease::kalman::{reference_theta, simulate_panel};

fn main() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    std::fs::create_dir_all(&dir).unwrap();

    let theta = reference_theta();
    let panel = simulate_panel(&theta, 0.0231, 1.0 / 52.0, 1520, (-0.01, 600f64.ln()), 9001);
    let panel_path = dir.join("lumber_futures_synthetic.csv");
    panel.write_csv(&panel_path).unwrap();
    println!("wrote {} ({} dates)", panel_path.display(), panel.len());

    let start = 1953 * 12 + 4; // 1953-05
    let n = 853; // through 2024-05
    let mut periods = Vec::with_capacity(n);
    let mut counts = vec![0u64; n];
    for k in 0..n {
        let ord = start + k;
        periods.push(format!("{:04}-{:02}", ord / 12, ord % 12 + 1));
    }
    for e in 0..17usize {
        counts[(e * 47) % n] += 1;
    }
    let series = DisasterCounts::new(periods, counts, false).unwrap();
    let counts_path = dir.join("wildfire_counts.csv");
    series.write_csv(&counts_path).unwrap();
    println!(
        "wrote {} ({} monthly periods, {} events over {:.2} years)",
        counts_path.display(),
        series.periods.len(),
        series.total_events(),
        series.total_years()
    );
}
