//! Forward evaluation: stopping-time estimation from a solved regression
//! stack, the closed-form per-path lease value under the market measure,
//! scenario comparison and the difference-in-value (DIV) metric.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{EconomicParams, GrowthCurve, ModelParams, StateVec, UncertaintyBox};
use crate::rng::domain;
use crate::sim::{simulate_path_into, PathSet, TimeGrid};
use crate::solver::{self, RegressionStack, Scenario, SolverConfig, StoppingProblem};

/// Which closed form the per-path amenity term uses.
///
/// The payoff discount always credits the grace period (no hazard before the
/// grace age). `PaperVerbatim` keeps the amenity term without that credit;
/// `GraceConsistent` applies the same survival convention to both terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValuationConvention {
    #[serde(rename = "paper")]
    PaperVerbatim,
    GraceConsistent,
}

impl ValuationConvention {
    pub fn name(&self) -> &'static str {
        match self {
            ValuationConvention::PaperVerbatim => "paper",
            ValuationConvention::GraceConsistent => "grace-consistent",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(ValuationConvention::PaperVerbatim),
            "grace-consistent" => Ok(ValuationConvention::GraceConsistent),
            other => Err(Error::Usage(format!(
                "unknown valuation convention '{}'; expected paper|grace-consistent",
                other
            ))),
        }
    }
}

/// One path's estimated stopping time and the state where it stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingSample {
    /// First grid time where the recovered value touches the payoff;
    /// the horizon if it never does before then.
    pub tau: f64,
    pub state_at_tau: StateVec,
}

/// Stopping samples for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingSet {
    pub scenario: Scenario,
    pub samples: Vec<StoppingSample>,
    pub seed: u64,
}

impl StoppingSet {
    pub fn mean_tau(&self) -> f64 {
        self.samples.iter().map(|s| s.tau).sum::<f64>() / self.samples.len() as f64
    }
}

/// Scans one simulated path for the first touch time.
fn first_touch<P: StoppingProblem>(
    stack: &RegressionStack,
    problem: &P,
    grid: &TimeGrid,
    path: &[StateVec],
) -> StoppingSample {
    for (i, state) in path.iter().enumerate() {
        if solver::touches_obstacle(stack, problem, i, state) {
            return StoppingSample { tau: grid.time(i), state_at_tau: *state };
        }
    }
    // The terminal index always touches, so this is unreachable for full
    // paths; keep the horizon fallback for truncated inputs.
    StoppingSample { tau: grid.horizon, state_at_tau: *path.last().unwrap() }
}

/// Estimates stopping times for every path in a stored path set.
pub fn estimate_stopping_times<P: StoppingProblem>(
    stack: &RegressionStack,
    problem: &P,
    scenario: Scenario,
    paths: &PathSet,
) -> Result<StoppingSet> {
    if paths.n_times != stack.grid.steps + 1 {
        return Err(Error::InvalidParam(format!(
            "paths carry {} time points but the stack's grid has {}",
            paths.n_times,
            stack.grid.steps + 1
        )));
    }
    let samples: Vec<StoppingSample> = (0..paths.n_paths)
        .into_par_iter()
        .map(|m| first_touch(stack, problem, &stack.grid, paths.path(m)))
        .collect();
    Ok(StoppingSet { scenario, samples, seed: paths.seed })
}

/// Streaming variant: simulates `n_paths` under the market measure (one RNG
/// stream per path) and scans each for its first touch without storing the
/// path matrix. `stream_indices` prefixes the per-path RNG key, so valuation
/// runs and the dedicated stopping pass use disjoint streams.
#[allow(clippy::too_many_arguments)]
pub fn estimate_stopping_times_streamed<P: StoppingProblem>(
    stack: &RegressionStack,
    problem: &P,
    scenario: Scenario,
    initial: StateVec,
    params: &ModelParams,
    n_paths: usize,
    seed: u64,
    rng_domain: u64,
    stream_indices: &[u64],
    price_floor: f64,
) -> Result<StoppingSet> {
    if n_paths == 0 {
        return Err(Error::InvalidParam("n_paths must be >= 1".into()));
    }
    let grid = stack.grid;
    let samples: Vec<StoppingSample> = (0..n_paths)
        .into_par_iter()
        .map(|m| {
            let mut buf = vec![StateVec::new(0.0, 1.0); grid.steps + 1];
            simulate_path_into(
                &mut buf,
                m as u64,
                rng_domain,
                stream_indices,
                &grid,
                initial,
                params,
                seed,
                price_floor,
            );
            first_touch(stack, problem, &grid, &buf)
        })
        .collect();
    Ok(StoppingSet { scenario, samples, seed })
}

/// `integral of e^{-rate t} dt` over `[a, b]`, with the small-rate limit.
fn discounted_annuity(rate: f64, a: f64, b: f64) -> f64 {
    if rate.abs() < 1e-14 {
        return b - a;
    }
    ((-rate * a).exp() - (-rate * b).exp()) / rate
}

/// Closed-form per-path lease value for a harvest at `tau >= grace_age`:
/// discounted payoff with the hazard active only after the grace age, the
/// pre-grace amenity annuity, and the post-grace amenity annuity under the
/// chosen convention.
pub fn per_path_value(
    sample: &StoppingSample,
    econ: &EconomicParams,
    growth: &GrowthCurve,
    r: f64,
    lambda_q: f64,
    convention: ValuationConvention,
) -> Result<f64> {
    let tau = sample.tau;
    let g = econ.grace_age;
    if tau < g {
        return Err(Error::Numerical(format!(
            "stopping time {} before the grace age {}: the payoff is negative there, so this \
             indicates a solver defect",
            tau, g
        )));
    }
    let harvest = sample.state_at_tau.price * econ.volume_factor * growth.volume(tau) - econ.harvest_cost;
    let discount = ((g - tau) * (r + lambda_q) - g * r).exp();
    let pre_grace_amenity = econ.amenity * discounted_annuity(r, 0.0, g);
    let hazard_annuity = discounted_annuity(r + lambda_q, g, tau);
    let post_grace_amenity = match convention {
        ValuationConvention::PaperVerbatim => econ.amenity * hazard_annuity,
        ValuationConvention::GraceConsistent => econ.amenity * (g * lambda_q).exp() * hazard_annuity,
    };
    Ok(discount * harvest + post_grace_amenity + pre_grace_amenity)
}

/// Mean per-path lease value of a stopping sample under the market measure.
/// Always discounts with the reference intensity, whatever scenario produced
/// the stopping rule.
pub fn lease_value(
    samples: &StoppingSet,
    econ: &EconomicParams,
    growth: &GrowthCurve,
    r: f64,
    lambda_q: f64,
    convention: ValuationConvention,
) -> Result<f64> {
    if samples.samples.is_empty() {
        return Err(Error::InvalidParam("no stopping samples to value".into()));
    }
    let mut total = 0.0;
    for s in &samples.samples {
        total += per_path_value(s, econ, growth, r, lambda_q, convention)?;
    }
    Ok(total / samples.samples.len() as f64)
}

/// Scenario-tagged aggregate over valuation runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuationReport {
    pub scenario: Scenario,
    pub mean: f64,
    /// Standard deviation of the per-run estimates.
    pub std: f64,
    /// `mean +/- 1.96 std / sqrt(runs)`.
    pub ci95: (f64, f64),
    /// Difference in value versus the no-uncertainty run, `(z2 - z1)/z1`;
    /// NaN when the scenario set carries no baseline.
    pub div: f64,
    pub runs: usize,
    pub paths_per_run: usize,
    pub seed: u64,
    pub per_run: Vec<f64>,
}

fn summarize(scenario: Scenario, per_run: &[f64], paths_per_run: usize, seed: u64) -> ValuationReport {
    let n = per_run.len() as f64;
    let mean = per_run.iter().sum::<f64>() / n;
    let var = if per_run.len() > 1 {
        per_run.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let std = var.sqrt();
    let half = 1.96 * std / n.sqrt();
    ValuationReport {
        scenario,
        mean,
        std,
        ci95: (mean - half, mean + half),
        div: f64::NAN,
        runs: per_run.len(),
        paths_per_run,
        seed,
        per_run: per_run.to_vec(),
    }
}

/// Everything produced for one scenario by [`run_scenarios`].
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub scenario: Scenario,
    pub stack: RegressionStack,
    /// Stopping sample from the dedicated (large) stopping pass.
    pub stopping: StoppingSet,
    pub mean_tau: f64,
    pub report: ValuationReport,
}

/// Orchestration knobs for a scenario comparison.
#[derive(Debug, Clone, Copy)]
pub struct RunPlan {
    /// Independent valuation runs (re-simulated path batches).
    pub runs: usize,
    /// Paths per valuation run.
    pub paths_per_run: usize,
    /// Paths for the dedicated stopping-time estimate.
    pub stopping_paths: usize,
    pub convention: ValuationConvention,
    pub seed: u64,
}

/// Solves one stack per scenario, estimates stopping times on re-simulated
/// market-measure paths (the same path streams for every scenario), values
/// each rule with the reference intensity, and reports DIV against the
/// no-uncertainty row when present.
pub fn run_scenarios(
    configs: &[SolverConfig],
    initial: StateVec,
    plan: &RunPlan,
) -> Result<Vec<ScenarioRun>> {
    if configs.is_empty() {
        return Err(Error::InvalidParam("no scenario configurations supplied".into()));
    }
    if plan.runs == 0 || plan.paths_per_run == 0 || plan.stopping_paths == 0 {
        return Err(Error::InvalidParam("runs and path counts must be positive".into()));
    }
    let base = &configs[0];
    for cfg in configs {
        if cfg.grid != base.grid || cfg.strat != base.strat {
            return Err(Error::InvalidParam(
                "scenario configurations must share the time grid and stratification".into(),
            ));
        }
    }

    let mut out = Vec::with_capacity(configs.len());
    for cfg in configs {
        let problem = cfg.lease_problem();
        let stack = solver::solve(cfg)?;

        let stopping = estimate_stopping_times_streamed(
            &stack,
            &problem,
            cfg.scenario,
            initial,
            &cfg.params,
            plan.stopping_paths,
            plan.seed,
            domain::STOPPING_PATH,
            &[],
            cfg.price_floor,
        )?;
        let mean_tau = stopping.mean_tau();

        let mut per_run = Vec::with_capacity(plan.runs);
        for run in 0..plan.runs {
            let batch = estimate_stopping_times_streamed(
                &stack,
                &problem,
                cfg.scenario,
                initial,
                &cfg.params,
                plan.paths_per_run,
                plan.seed,
                domain::VALUE_PATH,
                &[run as u64],
                cfg.price_floor,
            )?;
            per_run.push(lease_value(
                &batch,
                &cfg.econ,
                &cfg.growth,
                cfg.params.r,
                cfg.params.lambda_q,
                plan.convention,
            )?);
        }
        let report = summarize(cfg.scenario, &per_run, plan.paths_per_run, plan.seed);
        out.push(ScenarioRun { scenario: cfg.scenario, stack, stopping, mean_tau, report });
    }

    // DIV against the no-uncertainty baseline, when present.
    let baseline = out
        .iter()
        .find(|r| r.scenario == Scenario::NoUncertainty)
        .map(|r| r.report.mean);
    if let Some(z1) = baseline {
        for run in &mut out {
            run.report.div = (run.report.mean - z1) / z1;
        }
    }
    Ok(out)
}

/// Collapses the mean-reversion and long-run-yield segments to the reference
/// point, keeping only intensity uncertainty.
pub fn intensity_only_box(base: &UncertaintyBox, params: &ModelParams) -> UncertaintyBox {
    UncertaintyBox {
        kappa_lo: params.kappa_d,
        kappa_hi: params.kappa_d,
        mu_lo: params.mu_d,
        mu_hi: params.mu_d,
        lambda_lo: base.lambda_lo,
        lambda_hi: base.lambda_hi,
    }
}
