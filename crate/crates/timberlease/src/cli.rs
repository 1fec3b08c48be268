//! Command-line surface: configuration loading, subcommand orchestration,
//! deterministic seeding and emission of all CSV artifacts.
//!
//! Exit statuses: 0 success, 1 usage, 2 data/schema, 3 numerical failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::intensity::{estimate_intensity, DisasterCounts};
use crate::kalman::{estimate_two_factor, FuturesPanel, MleConfig, TwoFactorTheta};
use crate::output;
use crate::sim::simulate_paths;
use crate::solver::{self, BoundaryGridSpec, Scenario};
use crate::valuation::{run_scenarios, ValuationConvention};

#[derive(Debug, Parser)]
#[command(
    name = "timberlease",
    about = "Forest lease valuation and robust optimal harvesting under catastrophe risk",
    version
)]
struct Cli {
    /// Run configuration file (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for output CSVs.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// Desk-scale knob in (0, 1]: shrinks steps, cubes, samples and paths.
    #[arg(long, global = true)]
    scale: Option<f64>,

    /// Worker threads (0 = all cores). Outputs are identical for any value.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct ScenarioArgs {
    /// Scenario selection: conservative|none|optimistic|all.
    #[arg(long, default_value = "all")]
    scenario: String,

    /// Use the carbon-sequestration amenity.
    #[arg(long)]
    carbon: bool,

    /// Keep only intensity uncertainty (collapse the drift segments).
    #[arg(long)]
    intensity_only: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the two-factor model from a futures price panel CSV.
    EstimateFutures {
        /// CSV with schema date,price_f1,ttm_f1,...,price_f6,ttm_f6.
        csv: PathBuf,
    },
    /// Estimate the catastrophe intensity from a disaster-count CSV.
    EstimateIntensity {
        /// CSV with schema period,count (period YYYY or YYYY-MM).
        csv: PathBuf,
    },
    /// Solve the scenario value functions and dump the regression stacks.
    Solve {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Solve, estimate harvest times, value the rules and write reports.
    Value {
        #[command(flatten)]
        scenario: ScenarioArgs,

        /// Per-path closed form: paper|grace-consistent.
        #[arg(long)]
        valuation_convention: Option<String>,
    },
    /// Extract stopping/continuation boundaries at the given ages (years).
    Boundary {
        #[command(flatten)]
        scenario: ScenarioArgs,

        /// Comma-separated ages; an empty list writes nothing.
        #[arg(long, value_delimiter = ',', num_args = 0.., default_values_t = vec![50.0, 70.0, 100.0])]
        times: Vec<f64>,
    },
    /// Simulate market-measure paths and write them as CSV.
    Simulate,
}

fn scenario_set(arg: &str) -> Result<Vec<Scenario>> {
    if arg == "all" {
        Ok(vec![Scenario::Conservative, Scenario::NoUncertainty, Scenario::Optimistic])
    } else {
        Ok(vec![Scenario::parse(arg)?])
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    if let Some(scale) = cli.scale {
        cfg.apply_scale(scale)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn default_mle_init() -> TwoFactorTheta {
    TwoFactorTheta {
        sigma_p: 0.3,
        sigma_d: 0.4,
        kappa_d: 1.0,
        mu_d: 0.0,
        rho: 0.5,
        meas_noise: [0.03; 6],
    }
}

fn cmd_estimate_futures(cfg: &RunConfig, csv: &Path, out_dir: &Path) -> Result<()> {
    let panel = FuturesPanel::read_csv(csv, cfg.estimation.drop_bad_rows)?;
    let mle = MleConfig {
        r: cfg.model.r,
        dt: cfg.estimation.weekly_dt,
        max_iters: cfg.estimation.max_iters,
        n_starts: cfg.estimation.multi_starts,
        seed: cfg.run.seed,
        ..MleConfig::default()
    };
    let result = estimate_two_factor(&panel, &default_mle_init(), &mle)?;
    let out = out_dir.join("estimation.csv");
    output::write_estimation_csv(&result, &out)?;
    println!("{} dates, log-likelihood {:.1}", panel.len(), result.log_likelihood);
    println!("{:<10} {:>12} {:>12}", "parameter", "estimate", "std_error");
    for (name, est, se, _, _) in result.rows() {
        println!("{:<10} {:>12.4} {:>12.4}", name, est, se);
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_estimate_intensity(cfg: &RunConfig, csv: &Path, out_dir: &Path) -> Result<()> {
    let counts = DisasterCounts::read_csv(csv, cfg.estimation.fill_count_gaps)?;
    let est = estimate_intensity(&counts)?;
    if est.is_degenerate() {
        eprintln!(
            "warning: no events in {:.2} years; the zero intensity violates the model's \
             positive-intensity requirement, widen the data or floor the estimate",
            est.total_years
        );
    }
    let out = out_dir.join("intensity.csv");
    output::write_intensity_csv(&est, &out)?;
    println!(
        "lambda_hat {:.4} events/year (se {:.4}), 95% CI [{:.4}, {:.4}], {} events over {:.2} years",
        est.lambda_hat, est.std_error, est.ci95.0, est.ci95.1, est.total_events, est.total_years
    );
    println!("wrote {}", out.display());
    Ok(())
}

fn stack_path(out_dir: &Path, scenario: Scenario) -> PathBuf {
    out_dir.join(format!("stack_{}.csv", scenario.name()))
}

fn cmd_solve(cfg: &RunConfig, args: &ScenarioArgs, out_dir: &Path) -> Result<()> {
    for scenario in scenario_set(&args.scenario)? {
        let sc = cfg.solver_config(scenario, args.carbon, args.intensity_only);
        let stack = solver::solve(&sc)?;
        let path = stack_path(out_dir, scenario);
        solver::write_stack_csv(&stack, &path)?;
        println!(
            "solved {}: {} steps x {} cubes, {} mean-fallback cubes, {} floored steps -> {}",
            scenario.name(),
            sc.grid.steps,
            sc.strat.cube_count(),
            stack.fallback_cubes,
            stack.floored_steps,
            path.display()
        );
    }
    Ok(())
}

fn cmd_value(
    cfg: &RunConfig,
    args: &ScenarioArgs,
    convention: Option<&str>,
    out_dir: &Path,
) -> Result<()> {
    let mut plan = cfg.run_plan();
    if let Some(name) = convention {
        plan.convention = ValuationConvention::parse(name)?;
    }
    let configs: Vec<_> = scenario_set(&args.scenario)?
        .into_iter()
        .map(|s| cfg.solver_config(s, args.carbon, args.intensity_only))
        .collect();
    let runs = run_scenarios(&configs, cfg.initial_state(), &plan)?;

    let stopping: Vec<_> = runs.iter().map(|r| &r.stopping).collect();
    output::write_stopping_times_csv(&stopping, &out_dir.join("stopping_times.csv"))?;
    output::write_valuation_csv(&runs, &out_dir.join("valuation.csv"))?;
    output::write_report_csv(&runs, &out_dir.join("report.csv"))?;

    println!(
        "{:<14} {:>9} {:>12} {:>9} {:>22} {:>8}",
        "scenario", "mean_tau", "lease_mean", "std", "95% CI", "DIV(%)"
    );
    for run in &runs {
        let r = &run.report;
        println!(
            "{:<14} {:>9.2} {:>12.2} {:>9.2} [{:>9.2}, {:>9.2}] {:>8.2}",
            run.scenario.name(),
            run.mean_tau,
            r.mean,
            r.std,
            r.ci95.0,
            r.ci95.1,
            100.0 * r.div
        );
    }
    println!(
        "wrote stopping_times.csv, valuation.csv, report.csv under {}",
        out_dir.display()
    );
    Ok(())
}

fn cmd_boundary(cfg: &RunConfig, args: &ScenarioArgs, times: &[f64], out_dir: &Path) -> Result<()> {
    if times.is_empty() {
        return Ok(());
    }
    let grid = cfg.time_grid();
    let dt = grid.dt();
    // Validate every requested age before any solve.
    let mut indices = Vec::with_capacity(times.len());
    for &t in times {
        let i = (t / dt).round() as i64;
        if !(t >= 0.0) || i < 1 || i as usize >= grid.steps {
            return Err(Error::Usage(format!(
                "boundary age {} is outside the interior time grid (0, {})",
                t, grid.horizon
            )));
        }
        indices.push((t, i as usize));
    }
    for scenario in scenario_set(&args.scenario)? {
        let sc = cfg.solver_config(scenario, args.carbon, args.intensity_only);
        // Reuse a dumped stack when one matches this configuration.
        let stack = match solver::read_stack_csv(&stack_path(out_dir, scenario), &sc) {
            Ok(stack) => stack,
            Err(_) => solver::solve(&sc)?,
        };
        let problem = sc.lease_problem();
        for &(t, i) in &indices {
            let b = solver::extract_boundary(&stack, &problem, i, &BoundaryGridSpec::default())?;
            let path = out_dir.join(format!("boundary_t{}_{}.csv", t, scenario.name()));
            output::write_boundary_csv(&b, &path)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn cmd_simulate(cfg: &RunConfig, out_dir: &Path) -> Result<()> {
    let grid = cfg.time_grid();
    let paths = simulate_paths(
        cfg.simulate.paths,
        &grid,
        cfg.initial_state(),
        &cfg.model_params(),
        cfg.run.seed,
    )?;
    let out = out_dir.join("paths.csv");
    output::write_paths_csv(&paths, &grid, &out)?;
    println!(
        "simulated {} paths x {} steps ({} floored steps, fraction {:.2e}) -> {}",
        paths.n_paths,
        grid.steps,
        paths.floored_steps,
        paths.floored_fraction(),
        out.display()
    );
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let out_dir = &cli.out_dir;
    std::fs::create_dir_all(out_dir)?;
    // A dump of the effective configuration accompanies every run.
    std::fs::write(out_dir.join("effective_config.toml"), cfg.to_toml())?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| Error::Numerical(format!("cannot build thread pool: {}", e)))?;
    pool.install(|| match &cli.command {
        Command::EstimateFutures { csv } => cmd_estimate_futures(&cfg, csv, out_dir),
        Command::EstimateIntensity { csv } => cmd_estimate_intensity(&cfg, csv, out_dir),
        Command::Solve { scenario } => cmd_solve(&cfg, scenario, out_dir),
        Command::Value { scenario, valuation_convention } => {
            cmd_value(&cfg, scenario, valuation_convention.as_deref(), out_dir)
        }
        Command::Boundary { scenario, times } => cmd_boundary(&cfg, scenario, times, out_dir),
        Command::Simulate => cmd_simulate(&cfg, out_dir),
    })
}

/// Runs the CLI on explicit arguments; library entry point for tests.
pub fn execute<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e);
            e.exit_code()
        }
    }
}

/// Process entry point.
pub fn run() -> i32 {
    execute(std::env::args_os())
}
