//! Cross-check of the stratified-regression solver against a binomial tree
//! on a plain American put: the two-factor dynamics collapse to geometric
//! Brownian motion, the obstacle becomes the put payoff, and the generator
//! reduces to pure discounting.
//!
//! Run with: `cargo run --release --example american_put_oracle`

use timberlease::solver::StoppingProblem;
use timberlease::valuation::estimate_stopping_times_streamed;
use timberlease::{
    rng, solve_problem, BasisOrder, EconomicParams, GrowthCurve, ModelParams, Scenario,
    SolverConfig, StateVec, Stratification, TimeGrid, UncertaintyBox,
};

struct AmericanPut {
    strike: f64,
    rate: f64,
}

impl StoppingProblem for AmericanPut {
    fn obstacle(&self, _t: f64, state: &StateVec) -> f64 {
        (self.strike - state.price).max(0.0)
    }

    fn driver(&self, _t: f64, _state: &StateVec, y: f64, _z: (f64, f64)) -> f64 {
        -self.rate * y
    }
}

fn binomial_american_put(s0: f64, k: f64, r: f64, sigma: f64, t: f64, steps: usize) -> f64 {
    let dt = t / steps as f64;
    let up = (sigma * dt.sqrt()).exp();
    let down = 1.0 / up;
    let disc = (-r * dt).exp();
    let p = ((r * dt).exp() - down) / (up - down);
    let mut v: Vec<f64> = (0..=steps)
        .map(|j| (k - s0 * up.powi(j as i32) * down.powi((steps - j) as i32)).max(0.0))
        .collect();
    for i in (0..steps).rev() {
        for j in 0..=i {
            let s = s0 * up.powi(j as i32) * down.powi((i - j) as i32);
            v[j] = (disc * (p * v[j + 1] + (1.0 - p) * v[j])).max((k - s).max(0.0));
        }
    }
    v[0]
}

fn main() {
    let (s0, strike, r, sigma, horizon) = (100.0f64, 100.0, 0.05, 0.2, 1.0);
    let params = ModelParams {
        sigma_p: sigma,
        sigma_d: 1e-300,
        kappa_d: 1.0,
        mu_d: 0.0,
        rho: 0.0,
        r,
        lambda_q: 0.2392, // unused by the put's generator
    };
    let center = s0.ln();
    let cfg = SolverConfig {
        grid: TimeGrid::new(horizon, 100),
        strat: Stratification::new((center - 0.5, center + 0.5), (-0.02, 0.02), 25, 1000),
        basis: BasisOrder::Affine,
        scenario: Scenario::NoUncertainty,
        uncertainty: UncertaintyBox::reference(),
        econ: EconomicParams::reference(),
        params,
        growth: GrowthCurve::default(),
        seed: 20240,
        price_floor: 1e-8,
        tol_reflect: 1e-9,
    };
    let put = AmericanPut { strike, rate: r };

    let t0 = std::time::Instant::now();
    let stack = solve_problem(&cfg, &put).unwrap();
    println!("backward solve: {:?}", t0.elapsed());

    let n_paths = 100_000;
    let stopping = estimate_stopping_times_streamed(
        &stack,
        &put,
        Scenario::NoUncertainty,
        StateVec::new(0.0, s0),
        &params,
        n_paths,
        cfg.seed,
        rng::domain::STOPPING_PATH,
        &[],
        cfg.price_floor,
    )
    .unwrap();
    let price = stopping
        .samples
        .iter()
        .map(|s| (-r * s.tau).exp() * (strike - s.state_at_tau.price).max(0.0))
        .sum::<f64>()
        / n_paths as f64;

    let tree = binomial_american_put(s0, strike, r, sigma, horizon, 2000);
    println!("solver (first-touch rule on {} paths): {:.4}", n_paths, price);
    println!("2000-step binomial tree:               {:.4}", tree);
    println!("relative difference:                   {:.3}%", 100.0 * (price - tree).abs() / tree);
}
