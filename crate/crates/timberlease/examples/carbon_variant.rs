//! Carbon-sequestration variant: paying for delayed harvest raises the
//! amenity flow, which postpones the optimal harvesting time in every
//! scenario. Compares mean harvest times with and without the carbon value.
//!
//! Run with: `cargo run --release --example carbon_variant`
//! (a few minutes on one core)

use timberlease::config::RunConfig;
use timberlease::{run_scenarios, Scenario};

fn main() {
    let mut cfg = RunConfig::default();
    cfg.apply_scale(0.05).unwrap();
    let scenarios = [Scenario::Conservative, Scenario::NoUncertainty, Scenario::Optimistic];

    let mut rows = Vec::new();
    for carbon in [false, true] {
        let configs: Vec<_> = scenarios.iter().map(|s| cfg.solver_config(*s, carbon, false)).collect();
        let runs = run_scenarios(&configs, cfg.initial_state(), &cfg.run_plan()).unwrap();
        rows.push(runs.iter().map(|r| r.mean_tau).collect::<Vec<_>>());
    }

    println!(
        "amenity flows: base {} $/ha/year, with carbon credit {} $/ha/year",
        cfg.economic.amenity, cfg.economic.carbon_amenity
    );
    println!("{:<16} {:>14} {:>14} {:>12}", "scenario", "base tau", "carbon tau", "delay (days)");
    for (k, s) in scenarios.iter().enumerate() {
        let delay_days = (rows[1][k] - rows[0][k]) * 365.25;
        println!("{:<16} {:>14.2} {:>14.2} {:>12.0}", s.name(), rows[0][k], rows[1][k], delay_days);
    }
}
