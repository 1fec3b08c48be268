//! Forest lease valuation and robust optimal harvesting under catastrophe
//! risk and parameter uncertainty.
//!
//! The library estimates a two-factor stochastic convenience-yield model
//! from lumber futures (Kalman filter + MLE), estimates a Poisson
//! catastrophe intensity from disaster counts, and solves the resulting
//! reflected backward stochastic differential equations with a stratified
//! regression Monte Carlo scheme. Conservative and optimistic harvesting
//! rules come from extremizing the RBSDE generator over the estimated
//! parameter-uncertainty hypercube; re-simulated market-measure paths turn
//! those rules into lease values and a difference-in-value (DIV) metric.
//!
//! Start with the runnable examples (`cargo run --release --example ...`):
//! each major capability has one, from `futures_term_structure` through
//! `lease_valuation`. The `timberlease` binary exposes the same pipeline as
//! subcommands (`estimate-futures`, `estimate-intensity`, `solve`, `value`,
//! `boundary`, `simulate`).

pub mod cli;
pub mod config;
pub mod error;
pub mod intensity;
pub mod kalman;
pub mod model;
pub mod optim;
pub mod output;
pub mod rng;
pub mod sim;
pub mod solver;
pub mod valuation;

pub use error::{Error, Result};
pub use model::{
    alpha, driver_extremal, driver_f, payoff, survival, ControlPoint, DriverMode, EconomicParams,
    GrowthCurve, ModelParams, StateVec, UncertaintyBox,
};
pub use sim::{
    euler_step, simulate_paths, stratified_sample, PathSet, Stratification, TimeGrid,
};
pub use kalman::{
    build_uncertainty_box, estimate_two_factor, futures_price, kalman_loglik, EstimationResult,
    FuturesPanel, MleConfig, TwoFactorTheta,
};
pub use intensity::{
    estimate_intensity, lambda_ci_to_box_segment, DisasterCounts, IntensityEstimate,
};
pub use solver::{
    extract_boundary, recover_value, solve, solve_problem, BasisOrder, BoundaryGrid,
    BoundaryGridSpec, LeaseProblem, RegressionStack, Scenario, SolverConfig, StoppingProblem,
};
pub use valuation::{
    estimate_stopping_times, intensity_only_box, lease_value, run_scenarios, RunPlan, ScenarioRun,
    StoppingSample, StoppingSet, ValuationConvention, ValuationReport,
};
