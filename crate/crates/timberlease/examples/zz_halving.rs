use timberlease::config::RunConfig;
use timberlease::*;

fn value_at(steps: usize, seed: u64) -> f64 {
    let mut cfg = RunConfig::default();
    cfg.stratification.cubes_per_dim = 40;
    cfg.stratification.samples_per_cube = 250;
    cfg.grid.steps = steps;
    cfg.run.seed = seed;
    let sc = cfg.solver_config(Scenario::NoUncertainty, false, false);
    let stack = solve(&sc).unwrap();
    recover_value(&stack, &sc.lease_problem(), 0, &cfg.initial_state())
}

fn main() {
    let t = std::time::Instant::now();
    let base = value_at(1500, 42);
    println!("dt=0.1 seed 42: {:.4} [{:?}]", base, t.elapsed());
    for seed in [43u64, 44, 45] {
        let v = value_at(1500, seed);
        println!("dt=0.1 seed {}: {:.4} (diff {:.4})", seed, v, v - base);
    }
    let fine = value_at(3000, 42);
    println!("dt=0.05 seed 42: {:.4} (halving diff {:.4}) [{:?} total]", fine, fine - base, t.elapsed());
}
