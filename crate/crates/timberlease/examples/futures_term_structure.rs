//! Futures term structure under the two-factor model, with a Monte Carlo
//! consistency check: the futures price is the risk-neutral expectation of
//! the spot, so simulated terminal means must reproduce the closed form.
//!
//! Run with: `cargo run --release --example futures_term_structure`

use timberlease::{futures_price, simulate_paths, ModelParams, StateVec, TimeGrid};

fn main() {
    let params = ModelParams::reference();
    let state = StateVec::new(-0.01, 600.0);

    println!("futures curve at P = {} and delta = {}", state.price, state.delta);
    println!("{:>10} {:>12}", "maturity", "F(0,tau)");
    for tau in [0.0, 0.042, 0.125, 0.25, 0.459, 1.0, 2.0, 5.0] {
        println!("{:>10.3} {:>12.3}", tau, futures_price(&state, tau, &params));
    }

    println!();
    println!("martingale check: Monte Carlo E[P_tau] vs the closed form");
    println!("{:>6} {:>12} {:>12} {:>10}", "tau", "MC mean", "futures", "z-score");
    for tau in [0.1f64, 0.25, 0.5] {
        let steps = (tau * 500.0).round() as usize;
        let grid = TimeGrid::new(tau, steps);
        let paths = simulate_paths(50_000, &grid, state, &params, 11).unwrap();
        let n = paths.n_paths as f64;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for m in 0..paths.n_paths {
            let p = paths.state(m, steps).price;
            sum += p;
            sumsq += p * p;
        }
        let mean = sum / n;
        let se = (((sumsq / n) - mean * mean) / n).sqrt();
        let target = futures_price(&state, tau, &params);
        println!("{:>6.2} {:>12.3} {:>12.3} {:>10.2}", tau, mean, target, (mean - target) / se);
    }
}
