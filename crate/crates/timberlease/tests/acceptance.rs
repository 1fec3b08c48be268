//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! Criteria 1-6 and 8 run at desk scale inside the normal test budget; the
//! full-scale reproduction (criterion 7) takes hours on CPU and is ignored
//! by default:
//! `cargo test -p timberlease --test acceptance -- --ignored --nocapture`.

use rand::Rng;

use timberlease::config::RunConfig;
use timberlease::intensity::{estimate_intensity, lambda_ci_to_box_segment, DisasterCounts};
use timberlease::kalman::{
    estimate_two_factor, futures_price, reference_theta, simulate_panel, FuturesPanel, MleConfig,
    TwoFactorTheta, THETA_NAMES,
};
use timberlease::model::{
    driver_extremal, driver_f, ControlPoint, DriverMode, EconomicParams, GrowthCurve, ModelParams,
    StateVec, UncertaintyBox,
};
use timberlease::sim::{simulate_paths, Stratification, TimeGrid};
use timberlease::solver::{
    extract_boundary, solve_problem, BasisOrder, BoundaryGridSpec, Scenario, SolverConfig,
    StoppingProblem,
};
use timberlease::valuation::run_scenarios;
use timberlease::{rng, Error};

// --- criterion 1: American-put oracle ---------------------------------------

/// Cox-Ross-Rubinstein American put, the independent tree oracle.
fn binomial_american_put(s0: f64, strike: f64, r: f64, sigma: f64, t: f64, steps: usize) -> f64 {
    let dt = t / steps as f64;
    let up = (sigma * dt.sqrt()).exp();
    let down = 1.0 / up;
    let disc = (-r * dt).exp();
    let p_up = ((r * dt).exp() - down) / (up - down);
    let mut values: Vec<f64> = (0..=steps)
        .map(|j| {
            let s = s0 * up.powi(j as i32) * down.powi((steps - j) as i32);
            (strike - s).max(0.0)
        })
        .collect();
    for i in (0..steps).rev() {
        for j in 0..=i {
            let s = s0 * up.powi(j as i32) * down.powi((i - j) as i32);
            let cont = disc * (p_up * values[j + 1] + (1.0 - p_up) * values[j]);
            values[j] = cont.max((strike - s).max(0.0));
        }
    }
    values[0]
}

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

#[test]
fn acceptance_1_american_put_matches_binomial_tree() {
    let (s0, strike, r, sigma, t) = (100.0f64, 100.0, 0.05, 0.2, 1.0);
    // Two-factor dynamics collapsed to geometric Brownian motion: the yield
    // starts at its long-run level with vanishing volatility.
    let params = ModelParams {
        sigma_p: sigma,
        sigma_d: 1e-300,
        kappa_d: 1.0,
        mu_d: 0.0,
        rho: 0.0,
        r,
        lambda_q: 0.2392,
    };
    let center = s0.ln();
    let cfg = SolverConfig {
        grid: TimeGrid::new(t, 100),
        strat: Stratification::new((center - 0.5, center + 0.5), (-0.02, 0.02), 25, 3000),
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
    let stack = solve_problem(&cfg, &put).unwrap();
    // Price the rule the way the pipeline itself does: re-simulated paths
    // stopped at the first touch, averaging the discounted exercise value.
    let n_paths = 400_000;
    let stopping = timberlease::valuation::estimate_stopping_times_streamed(
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
    let got = stopping
        .samples
        .iter()
        .map(|s| (-r * s.tau).exp() * (strike - s.state_at_tau.price).max(0.0))
        .sum::<f64>()
        / n_paths as f64;
    let tree = binomial_american_put(s0, strike, r, sigma, t, 2000);
    let rel = (got - tree).abs() / tree;
    assert!(
        rel < 0.01,
        "American put: solver {} vs binomial {} (relative error {:.4})",
        got,
        tree,
        rel
    );
    println!(
        "[PASS] criterion 1: American put {:.4} vs 2000-step binomial {:.4} ({:.3}% relative, tolerance 1%)",
        got,
        tree,
        100.0 * rel
    );
}

// --- criterion 2: extremal driver vs dense grid ------------------------------

#[test]
fn acceptance_2_corner_extremum_equals_grid_brute_force() {
    let params = ModelParams::reference();
    let econ = EconomicParams::reference();
    let bounds = UncertaintyBox::reference();
    let mut r = rng::stream(77, rng::domain::SYNTHETIC, &[2]);
    let n_grid = 21;
    let mut checked = 0;
    for _ in 0..1000 {
        let state = StateVec::new(r.gen_range(-2.0..2.0), r.gen_range(1.0..1200.0));
        let y = r.gen_range(-2000.0..5000.0);
        let z = (r.gen_range(-100.0..100.0), r.gen_range(-100.0..100.0));
        let t = r.gen_range(40.0..150.0);
        for mode in [DriverMode::Sup, DriverMode::Inf] {
            let fast = driver_extremal(mode, t, &state, y, z, &bounds, &econ, &params);
            let mut slow = f64::NAN;
            for a in 0..n_grid {
                for b in 0..n_grid {
                    for c in 0..n_grid {
                        let frac = |k: usize| k as f64 / (n_grid - 1) as f64;
                        let u = ControlPoint {
                            kappa_u: bounds.kappa_lo + frac(a) * (bounds.kappa_hi - bounds.kappa_lo),
                            mu_u: bounds.mu_lo + frac(b) * (bounds.mu_hi - bounds.mu_lo),
                            lambda_u: bounds.lambda_lo + frac(c) * (bounds.lambda_hi - bounds.lambda_lo),
                        };
                        let v = driver_f(t, &state, y, z, &u, &econ, &params);
                        if slow.is_nan()
                            || (mode == DriverMode::Sup && v > slow)
                            || (mode == DriverMode::Inf && v < slow)
                        {
                            slow = v;
                        }
                    }
                }
            }
            let denom = fast.abs().max(slow.abs()).max(1.0);
            assert!(
                (fast - slow).abs() / denom < 1e-10,
                "mode {:?}: corner {} vs grid {}",
                mode,
                fast,
                slow
            );
            checked += 1;
        }
    }
    println!(
        "[PASS] criterion 2: corner extrema match 21^3 grid on {} evaluations within 1e-10 relative",
        checked
    );
}

// --- criterion 3: futures/martingale consistency ------------------------------

#[test]
fn acceptance_3_monte_carlo_mean_matches_futures_price() {
    let params = ModelParams::reference();
    let s0 = StateVec::new(-0.01, 600.0);
    for tau in [0.1f64, 0.25, 0.5] {
        let steps = (tau * 500.0).round() as usize;
        let grid = TimeGrid::new(tau, steps);
        let paths = simulate_paths(100_000, &grid, s0, &params, 30_030).unwrap();
        let n = paths.n_paths as f64;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for m in 0..paths.n_paths {
            let p = paths.state(m, steps).price;
            sum += p;
            sumsq += p * p;
        }
        let mean = sum / n;
        let se = (((sumsq / n) - mean * mean).max(0.0) / n).sqrt();
        let target = futures_price(&s0, tau, &params);
        let dev = (mean - target).abs() / se;
        assert!(
            dev < 3.0,
            "tau {}: Monte Carlo mean {} vs futures {} ({:.2} standard errors)",
            tau,
            mean,
            target,
            dev
        );
        println!(
            "[PASS] criterion 3 (tau={}): MC mean {:.3} vs futures {:.3} ({:.2} MC standard errors, tolerance 3)",
            tau, mean, target, dev
        );
    }
}

// --- criterion 4: estimation recovery ----------------------------------------

#[test]
fn acceptance_4_synthetic_panel_recovery() {
    let truth = TwoFactorTheta { mu_d: -0.02, ..reference_theta() };
    let panel = simulate_panel(&truth, 0.0231, 1.0 / 52.0, 1520, (-0.01, 600f64.ln()), 404);
    let mut init = truth.to_vec();
    init[0] *= 1.25;
    init[1] *= 0.8;
    init[2] *= 1.3;
    init[3] = 0.03;
    init[4] -= 0.15;
    for d in &mut init[5..11] {
        *d *= 1.5;
    }
    let cfg = MleConfig { n_starts: 2, seed: 11, ..MleConfig::default() };
    let fit = estimate_two_factor(&panel, &TwoFactorTheta::from_vec(&init), &cfg).unwrap();
    let est = fit.estimates.to_vec();
    let se = fit.std_errors.to_vec();
    let want = truth.to_vec();
    for k in 0..11 {
        let dev = (est[k] - want[k]).abs() / se[k];
        assert!(
            dev <= 3.0,
            "{}: estimate {} vs truth {} is {:.2} reported standard errors away",
            THETA_NAMES[k],
            est[k],
            want[k],
            dev
        );
    }
    println!(
        "[PASS] criterion 4: 1520-date synthetic recovery within 3 standard errors (loglik {:.1})",
        fit.log_likelihood
    );

    // The published futures panel is licensed exchange data and not shipped;
    // when a copy is placed at data/lumber_futures.csv the Table-2 check runs.
    let real = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/lumber_futures.csv");
    if real.exists() {
        let panel = FuturesPanel::read_csv(&real, false).unwrap();
        let fit = estimate_two_factor(&panel, &TwoFactorTheta::from_vec(&init), &cfg).unwrap();
        let published = [
            ("sigma_p", 0.3304, 0.0061),
            ("sigma_d", 0.4640, 0.0131),
            ("kappa_d", 0.9441, 0.0642),
            ("rho", 0.7061, 0.0156),
        ];
        let est = fit.estimates.to_vec();
        for (name, value, se) in published {
            let k = THETA_NAMES.iter().position(|n| *n == name).unwrap();
            assert!(
                (est[k] - value).abs() <= 2.0 * se,
                "{}: {} vs published {} ({} se)",
                name,
                est[k],
                value,
                se
            );
        }
        assert!((fit.log_likelihood - 20_230.2).abs() <= 1.0);
        println!("[PASS] criterion 4 (panel): published estimates matched within 2 standard errors");
    } else {
        println!(
            "[PASS] criterion 4 (panel): no futures panel at data/lumber_futures.csv; published-value check not applicable"
        );
    }
}

// --- criterion 5: intensity MLE -----------------------------------------------

#[test]
fn acceptance_5_intensity_estimate_matches_published_values() {
    // Monthly series May 1953 .. May 2024 with 17 events.
    let start = 1953 * 12 + 4;
    let n = 853;
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
    let est = estimate_intensity(&series).unwrap();
    assert!((est.lambda_hat - 0.2392).abs() <= 5e-4, "lambda {}", est.lambda_hat);
    let (lo, hi) = lambda_ci_to_box_segment(&est, 1e-6);
    assert!((lo - 0.1255).abs() <= 1e-3, "ci low {}", lo);
    assert!((hi - 0.3528).abs() <= 1e-3, "ci high {}", hi);
    println!(
        "[PASS] criterion 5: intensity {:.4} (se {:.4}), CI [{:.4}, {:.4}]",
        est.lambda_hat, est.std_error, lo, hi
    );
}

// --- criterion 6: desk-scale ordering invariants --------------------------------

#[test]
fn acceptance_6_desk_scale_ordering_invariants() {
    let mut cfg = RunConfig::default();
    cfg.apply_scale(0.1).unwrap();
    let scenarios = [Scenario::Conservative, Scenario::NoUncertainty, Scenario::Optimistic];

    let base_cfgs: Vec<SolverConfig> =
        scenarios.iter().map(|s| cfg.solver_config(*s, false, false)).collect();
    let base = run_scenarios(&base_cfgs, cfg.initial_state(), &cfg.run_plan()).unwrap();
    let tau = |runs: &[timberlease::valuation::ScenarioRun], s: Scenario| {
        runs.iter().find(|r| r.scenario == s).map(|r| r.mean_tau).unwrap()
    };
    let (c0, n0, o0) = (
        tau(&base, Scenario::Conservative),
        tau(&base, Scenario::NoUncertainty),
        tau(&base, Scenario::Optimistic),
    );
    assert!(c0 < n0 && n0 < o0, "base harvest-time ordering failed: {} / {} / {}", c0, n0, o0);
    println!(
        "[PASS] criterion 6a: mean harvest times ordered conservative {:.2} < none {:.2} < optimistic {:.2}",
        c0, n0, o0
    );

    let carbon_cfgs: Vec<SolverConfig> =
        scenarios.iter().map(|s| cfg.solver_config(*s, true, false)).collect();
    let carbon = run_scenarios(&carbon_cfgs, cfg.initial_state(), &cfg.run_plan()).unwrap();
    let (c1, n1, o1) = (
        tau(&carbon, Scenario::Conservative),
        tau(&carbon, Scenario::NoUncertainty),
        tau(&carbon, Scenario::Optimistic),
    );
    assert!(
        c1 > c0 && n1 > n0 && o1 > o0,
        "carbon amenity must delay every scenario: ({}, {}, {}) vs ({}, {}, {})",
        c1,
        n1,
        o1,
        c0,
        n0,
        o0
    );
    println!(
        "[PASS] criterion 6b: carbon value strictly delays harvests ({:.2}/{:.2}/{:.2} vs {:.2}/{:.2}/{:.2})",
        c1, n1, o1, c0, n0, o0
    );

    let io_cfgs: Vec<SolverConfig> = [Scenario::Conservative, Scenario::Optimistic]
        .iter()
        .map(|s| cfg.solver_config(*s, false, true))
        .collect();
    let io = run_scenarios(&io_cfgs, cfg.initial_state(), &cfg.run_plan()).unwrap();
    let c_io = tau(&io, Scenario::Conservative);
    let o_io = tau(&io, Scenario::Optimistic);
    assert!(
        o_io - c_io < o0 - c0,
        "intensity-only spread {} must be narrower than the full-box spread {}",
        o_io - c_io,
        o0 - c0
    );
    // Matched seeds make the per-side set-inclusion comparison sharp.
    assert!(c_io >= c0 - 0.1, "intensity-only conservative {} vs full-box {}", c_io, c0);
    assert!(o_io <= o0 + 0.1, "intensity-only optimistic {} vs full-box {}", o_io, o0);
    println!(
        "[PASS] criterion 6c: intensity-only box narrows the harvest-time spread ({:.2} vs {:.2} years)",
        o_io - c_io,
        o0 - c0
    );

    // Conservative stop regions contain optimistic stop regions. The
    // classification is tolerance based, so allow a 0.5% whisker of
    // boundary-curve nodes.
    let dt = cfg.time_grid().dt();
    let cons = base.iter().find(|r| r.scenario == Scenario::Conservative).unwrap();
    let opt = base.iter().find(|r| r.scenario == Scenario::Optimistic).unwrap();
    let cons_problem = base_cfgs[0].lease_problem();
    let opt_problem = base_cfgs[2].lease_problem();
    for age in [50.0, 70.0, 100.0] {
        let i = (age / dt).round() as usize;
        let bc = extract_boundary(&cons.stack, &cons_problem, i, &BoundaryGridSpec::default()).unwrap();
        let bo = extract_boundary(&opt.stack, &opt_problem, i, &BoundaryGridSpec::default()).unwrap();
        let mut opt_nodes = 0usize;
        let mut holes = 0usize;
        for k in 0..bc.stop.len() {
            if bo.stop[k] {
                opt_nodes += 1;
                if !bc.stop[k] {
                    holes += 1;
                }
            }
        }
        assert!(opt_nodes > 0, "age {}: optimistic stop region is empty", age);
        assert!(
            (holes as f64) <= (0.005 * opt_nodes as f64).ceil(),
            "age {}: {} of {} optimistic stop nodes outside the conservative region",
            age,
            holes,
            opt_nodes
        );
        println!(
            "[PASS] criterion 6d (age {}): conservative region contains the optimistic region ({} nodes, {} holes)",
            age, opt_nodes, holes
        );
    }
}

// --- criterion 7: full-scale reproduction (optional tier) ----------------------

/// Full-scale run of the published experiment grid. Hours on CPU; run with
/// `cargo test -p timberlease --test acceptance --release -- --ignored --nocapture`.
#[test]
#[ignore = "full-scale reproduction takes hours on CPU"]
fn acceptance_7_full_scale_reproduction() {
    let cfg = RunConfig::default();
    let scenarios = [Scenario::Conservative, Scenario::NoUncertainty, Scenario::Optimistic];
    let base_cfgs: Vec<SolverConfig> =
        scenarios.iter().map(|s| cfg.solver_config(*s, false, false)).collect();
    let base = run_scenarios(&base_cfgs, cfg.initial_state(), &cfg.run_plan()).unwrap();
    let taus: Vec<f64> = base.iter().map(|r| r.mean_tau).collect();
    println!("full-scale mean harvest times: {:?}", taus);
    for (got, want) in taus.iter().zip([51.90, 52.95, 56.23]) {
        assert!(
            (got - want).abs() <= 1.5,
            "harvest time {} vs published {} (tolerance 1.5 years)",
            got,
            want
        );
    }
    let divs: Vec<f64> = base.iter().map(|r| r.report.div).collect();
    println!("full-scale DIVs: {:?}", divs);
    let cons_div = base.iter().find(|r| r.scenario == Scenario::Conservative).unwrap().report.div;
    let opt_div = base.iter().find(|r| r.scenario == Scenario::Optimistic).unwrap().report.div;
    assert!((100.0 * opt_div - (-14.80)).abs() <= 3.0);
    assert!((100.0 * cons_div - (-0.55)).abs() <= 3.0);

    let carbon_cfgs: Vec<SolverConfig> =
        scenarios.iter().map(|s| cfg.solver_config(*s, true, false)).collect();
    let carbon = run_scenarios(&carbon_cfgs, cfg.initial_state(), &cfg.run_plan()).unwrap();
    for (run, want) in carbon.iter().zip([52.83, 54.23, 58.02]) {
        assert!(
            (run.mean_tau - want).abs() <= 1.5,
            "carbon harvest time {} vs published {}",
            run.mean_tau,
            want
        );
    }
    println!("[PASS] criterion 7: full-scale harvest times and DIVs within published tolerances");
}

// --- criterion 8: determinism -----------------------------------------------

#[test]
fn acceptance_8_serial_and_parallel_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("tiny.toml");
    std::fs::write(
        &config_path,
        "[grid]\nhorizon = 150.0\nsteps = 150\n\n\
         [stratification]\ncubes_per_dim = 16\nsamples_per_cube = 64\n\n\
         [valuation]\nruns = 3\npaths_per_run = 50\nstopping_paths = 400\n\n\
         [simulate]\npaths = 4\n\n[run]\nseed = 99\n",
    )
    .unwrap();
    let out_serial = dir.path().join("serial");
    let out_parallel = dir.path().join("parallel");

    let run = |out: &std::path::Path, threads: &str| {
        let code = timberlease::cli::execute([
            "timberlease",
            "value",
            "--scenario",
            "all",
            "--config",
            config_path.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert_eq!(code, 0, "value command failed with --threads {}", threads);
    };
    run(&out_serial, "1");
    run(&out_parallel, "4");

    let mut names: Vec<String> = std::fs::read_dir(&out_serial)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.contains(&"report.csv".to_string()));
    assert!(names.contains(&"stopping_times.csv".to_string()));
    assert!(names.contains(&"valuation.csv".to_string()));

    // Three scenario rows with a parseable DIV column, zero for the
    // no-uncertainty row against itself.
    let report = std::fs::read_to_string(out_serial.join("report.csv")).unwrap();
    let rows: Vec<&str> = report.lines().collect();
    assert_eq!(rows.len(), 4, "report.csv should have a header plus three scenario rows");
    assert!(rows[0].starts_with("scenario,mean,std,ci_lo,ci_hi,div"));
    for row in &rows[1..] {
        let cols: Vec<&str> = row.split(',').collect();
        let div: f64 = cols[5].parse().unwrap();
        assert!(div.is_finite());
        if cols[0] == "none" {
            assert_eq!(div, 0.0);
        }
    }

    // The effective configuration reloads to an identical RunConfig.
    let reloaded = RunConfig::from_path(&out_serial.join("effective_config.toml")).unwrap();
    let expected = RunConfig::from_path(&config_path).unwrap();
    assert_eq!(reloaded, expected);
    for name in &names {
        let a = std::fs::read(out_serial.join(name)).unwrap();
        let b = std::fs::read(out_parallel.join(name)).unwrap();
        assert!(
            a == b,
            "{} differs between serial and parallel runs ({} vs {} bytes)",
            name,
            a.len(),
            b.len()
        );
    }
    println!(
        "[PASS] criterion 8: serial and 4-thread runs produced byte-identical outputs ({} files)",
        names.len()
    );
}

// --- error-path contracts exercised through the CLI surface -------------------

#[test]
fn cli_exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");

    // Usage error: unknown subcommand.
    assert_eq!(timberlease::cli::execute(["timberlease", "frobnicate"]), 1);

    // Data error: empty futures CSV.
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(
        timberlease::cli::execute([
            "timberlease",
            "estimate-futures",
            empty.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
        ]),
        2
    );

    // Usage error: boundary age outside the grid.
    assert_eq!(
        timberlease::cli::execute([
            "timberlease",
            "boundary",
            "--times",
            "200",
            "--out-dir",
            out.to_str().unwrap(),
        ]),
        1
    );

    // An explicitly empty times list writes nothing and succeeds.
    assert_eq!(
        timberlease::cli::execute([
            "timberlease",
            "boundary",
            "--times",
            "--out-dir",
            out.to_str().unwrap(),
        ]),
        0
    );
    assert!(std::fs::read_dir(&out)
        .map(|entries| entries
            .filter_map(|e| e.ok())
            .all(|e| !e.file_name().to_string_lossy().starts_with("boundary_")))
        .unwrap_or(true));

    // Success path: simulate with a tiny config.
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, "[grid]\nhorizon = 10.0\nsteps = 50\n\n[simulate]\npaths = 2\n").unwrap();
    assert_eq!(
        timberlease::cli::execute([
            "timberlease",
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
        ]),
        0
    );
    assert!(out.join("paths.csv").exists());
    assert!(out.join("effective_config.toml").exists());

    // Numerical-failure class is distinct.
    assert_eq!(Error::Numerical("x".into()).exit_code(), 3);
}
