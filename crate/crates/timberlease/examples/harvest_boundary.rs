//! Stopping/continuation boundaries of the harvesting problem: solves the
//! conservative and optimistic scenarios at desk scale, extracts the stop
//! regions at ages 50/70/100 and writes them as CSV for plotting.
//!
//! Run with: `cargo run --release --example harvest_boundary`
//! (about a minute on one core)

use timberlease::config::RunConfig;
use timberlease::output::write_boundary_csv;
use timberlease::{extract_boundary, solve, BoundaryGridSpec, Scenario};

fn main() {
    let mut cfg = RunConfig::default();
    cfg.apply_scale(0.05).unwrap();
    let out = std::path::Path::new("out");

    let mut region_sizes = Vec::new();
    for scenario in [Scenario::Conservative, Scenario::Optimistic] {
        let sc = cfg.solver_config(scenario, false, false);
        let problem = sc.lease_problem();
        let t0 = std::time::Instant::now();
        let stack = solve(&sc).unwrap();
        println!("solved {} in {:?}", scenario.name(), t0.elapsed());
        for age in [50.0, 70.0, 100.0] {
            let i = (age / sc.grid.dt()).round() as usize;
            let b = extract_boundary(&stack, &problem, i, &BoundaryGridSpec::default()).unwrap();
            let stops = b.stop.iter().filter(|s| **s).count();
            region_sizes.push((scenario, age, stops));
            let path = out.join(format!("boundary_t{}_{}.csv", age, scenario.name()));
            write_boundary_csv(&b, &path).unwrap();
            println!("  age {:>5}: {:>4} of {} nodes in the stop region -> {}", age, stops, b.stop.len(), path.display());
        }
    }

    println!();
    for age in [50.0, 70.0, 100.0] {
        let cons = region_sizes.iter().find(|(s, a, _)| *s == Scenario::Conservative && *a == age).unwrap().2;
        let opt = region_sizes.iter().find(|(s, a, _)| *s == Scenario::Optimistic && *a == age).unwrap().2;
        println!(
            "age {:>5}: conservative stop region ({} nodes) >= optimistic ({} nodes): {}",
            age,
            cons,
            opt,
            cons >= opt
        );
    }
}
