//! Run configuration: a sectioned `key = value` (TOML) file validated
//! against every module invariant at load time, with the full-scale
//! experiment settings as defaults and a single `scale` knob that shrinks
//! the grid, the stratification and the path counts for desk-scale runs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EconomicParams, GrowthCurve, ModelParams, StateVec, UncertaintyBox};
use crate::sim::{Stratification, TimeGrid};
use crate::solver::{BasisOrder, Scenario, SolverConfig};
use crate::valuation::{RunPlan, ValuationConvention};

fn default_horizon() -> f64 {
    150.0
}
fn default_steps() -> usize {
    3000
}

/// Time grid section. `dt`, when present, must equal `horizon / steps`
/// exactly; it exists so config files can state the step size explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { horizon: default_horizon(), steps: default_steps(), dt: None }
    }
}

fn default_price() -> f64 {
    600.0
}
fn default_delta() -> f64 {
    -0.01
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default = "default_price")]
    pub price: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection { price: default_price(), delta: default_delta() }
    }
}

fn default_log_price_domain() -> [f64; 2] {
    [-2.5, 8.5]
}
fn default_delta_domain() -> [f64; 2] {
    [-2.0, 2.0]
}
fn default_cubes() -> usize {
    80
}
fn default_samples() -> usize {
    1000
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StratSection {
    #[serde(default = "default_log_price_domain")]
    pub log_price_domain: [f64; 2],
    #[serde(default = "default_delta_domain")]
    pub delta_domain: [f64; 2],
    #[serde(default = "default_cubes")]
    pub cubes_per_dim: usize,
    #[serde(default = "default_samples")]
    pub samples_per_cube: usize,
}

impl Default for StratSection {
    fn default() -> Self {
        StratSection {
            log_price_domain: default_log_price_domain(),
            delta_domain: default_delta_domain(),
            cubes_per_dim: default_cubes(),
            samples_per_cube: default_samples(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub sigma_p: f64,
    pub sigma_d: f64,
    pub kappa_d: f64,
    pub mu_d: f64,
    pub rho: f64,
    pub r: f64,
    pub lambda_q: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let p = ModelParams::reference();
        ModelSection {
            sigma_p: p.sigma_p,
            sigma_d: p.sigma_d,
            kappa_d: p.kappa_d,
            mu_d: p.mu_d,
            rho: p.rho,
            r: p.r,
            lambda_q: p.lambda_q,
        }
    }
}

fn default_carbon_amenity() -> f64 {
    47.54
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EconomicSection {
    pub harvest_cost: f64,
    pub amenity: f64,
    /// Amenity used when the carbon-sequestration variant is requested.
    pub carbon_amenity: f64,
    pub grace_age: f64,
    pub volume_factor: f64,
}

impl Default for EconomicSection {
    fn default() -> Self {
        let e = EconomicParams::reference();
        EconomicSection {
            harvest_cost: e.harvest_cost,
            amenity: e.amenity,
            carbon_amenity: default_carbon_amenity(),
            grace_age: e.grace_age,
            volume_factor: e.volume_factor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrowthSection {
    pub scale: f64,
    pub coefficient: f64,
    pub exponent: f64,
    pub lower_knot: f64,
    pub upper_knot: f64,
}

impl Default for GrowthSection {
    fn default() -> Self {
        let g = GrowthCurve::default();
        GrowthSection {
            scale: g.scale,
            coefficient: g.coefficient,
            exponent: g.exponent,
            lower_knot: g.lower_knot,
            upper_knot: g.upper_knot,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UncertaintySection {
    pub kappa: [f64; 2],
    pub mu: [f64; 2],
    pub lambda: [f64; 2],
}

impl Default for UncertaintySection {
    fn default() -> Self {
        let b = UncertaintyBox::reference();
        UncertaintySection {
            kappa: [b.kappa_lo, b.kappa_hi],
            mu: [b.mu_lo, b.mu_hi],
            lambda: [b.lambda_lo, b.lambda_hi],
        }
    }
}

fn default_tol_reflect() -> f64 {
    1e-9
}
fn default_price_floor() -> f64 {
    1e-8
}
fn default_basis() -> BasisOrder {
    BasisOrder::Affine
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tol_reflect: f64,
    pub price_floor: f64,
    pub basis: BasisOrder,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            tol_reflect: default_tol_reflect(),
            price_floor: default_price_floor(),
            basis: default_basis(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValuationSection {
    pub convention: ValuationConvention,
    /// Independent valuation runs averaged in the report.
    pub runs: usize,
    /// Re-simulated paths per valuation run.
    pub paths_per_run: usize,
    /// Paths for the harvest-time estimate.
    pub stopping_paths: usize,
}

impl Default for ValuationSection {
    fn default() -> Self {
        ValuationSection {
            convention: ValuationConvention::PaperVerbatim,
            runs: 10,
            paths_per_run: 1000,
            stopping_paths: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimationSection {
    /// Observation spacing of the futures panel in years.
    pub weekly_dt: f64,
    pub multi_starts: usize,
    pub max_iters: usize,
    /// Drop panel rows with missing cells instead of failing.
    pub drop_bad_rows: bool,
    /// Treat gaps in the disaster series as zero-count periods.
    pub fill_count_gaps: bool,
}

impl Default for EstimationSection {
    fn default() -> Self {
        EstimationSection {
            weekly_dt: 1.0 / 52.0,
            multi_starts: 5,
            max_iters: 8000,
            drop_bad_rows: false,
            fill_count_gaps: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    /// Paths written by the `simulate` subcommand.
    pub paths: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection { paths: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Master seed; every stream in the run derives from it.
    pub seed: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { seed: 42 }
    }
}

/// The complete run configuration. Defaults reproduce the full-scale
/// experiment settings; any subset of keys may be overridden in the file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridSection,
    pub initial: InitialSection,
    pub stratification: StratSection,
    pub model: ModelSection,
    pub economic: EconomicSection,
    pub growth: GrowthSection,
    pub uncertainty: UncertaintySection,
    pub solver: SolverSection,
    pub valuation: ValuationSection,
    pub estimation: EstimationSection,
    pub simulate: SimulateSection,
    pub run: RunSection,
}

impl RunConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {}", path.display(), e)))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), e)))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn model_params(&self) -> ModelParams {
        ModelParams {
            sigma_p: self.model.sigma_p,
            sigma_d: self.model.sigma_d,
            kappa_d: self.model.kappa_d,
            mu_d: self.model.mu_d,
            rho: self.model.rho,
            r: self.model.r,
            lambda_q: self.model.lambda_q,
        }
    }

    pub fn economic_params(&self, carbon: bool) -> EconomicParams {
        EconomicParams {
            harvest_cost: self.economic.harvest_cost,
            amenity: if carbon { self.economic.carbon_amenity } else { self.economic.amenity },
            grace_age: self.economic.grace_age,
            volume_factor: self.economic.volume_factor,
        }
    }

    pub fn growth_curve(&self) -> GrowthCurve {
        GrowthCurve {
            scale: self.growth.scale,
            coefficient: self.growth.coefficient,
            exponent: self.growth.exponent,
            lower_knot: self.growth.lower_knot,
            upper_knot: self.growth.upper_knot,
        }
    }

    pub fn uncertainty_box(&self) -> UncertaintyBox {
        UncertaintyBox {
            kappa_lo: self.uncertainty.kappa[0],
            kappa_hi: self.uncertainty.kappa[1],
            mu_lo: self.uncertainty.mu[0],
            mu_hi: self.uncertainty.mu[1],
            lambda_lo: self.uncertainty.lambda[0],
            lambda_hi: self.uncertainty.lambda[1],
        }
    }

    pub fn time_grid(&self) -> TimeGrid {
        TimeGrid::new(self.grid.horizon, self.grid.steps)
    }

    pub fn stratification(&self) -> Stratification {
        Stratification::new(
            (self.stratification.log_price_domain[0], self.stratification.log_price_domain[1]),
            (self.stratification.delta_domain[0], self.stratification.delta_domain[1]),
            self.stratification.cubes_per_dim,
            self.stratification.samples_per_cube,
        )
    }

    pub fn initial_state(&self) -> StateVec {
        StateVec::new(self.initial.delta, self.initial.price)
    }

    /// Solver configuration for one scenario. `carbon` swaps in the
    /// carbon-augmented amenity; `intensity_only` collapses the drift
    /// segments of the uncertainty box.
    pub fn solver_config(&self, scenario: Scenario, carbon: bool, intensity_only: bool) -> SolverConfig {
        let params = self.model_params();
        let mut uncertainty = self.uncertainty_box();
        if intensity_only {
            uncertainty = crate::valuation::intensity_only_box(&uncertainty, &params);
        }
        SolverConfig {
            grid: self.time_grid(),
            strat: self.stratification(),
            basis: self.solver.basis,
            scenario,
            uncertainty,
            econ: self.economic_params(carbon),
            params,
            growth: self.growth_curve(),
            seed: self.run.seed,
            price_floor: self.solver.price_floor,
            tol_reflect: self.solver.tol_reflect,
        }
    }

    pub fn run_plan(&self) -> RunPlan {
        RunPlan {
            runs: self.valuation.runs,
            paths_per_run: self.valuation.paths_per_run,
            stopping_paths: self.valuation.stopping_paths,
            convention: self.valuation.convention,
            seed: self.run.seed,
        }
    }

    /// Applies the desk-scale knob: steps and path counts shrink linearly,
    /// cubes per dimension halve per decade of scale, samples per cube
    /// quarter per decade. `scale = 0.1` gives the documented desk preset
    /// (steps 300, cubes 40, samples 250, paths 10^4 / 10^2).
    pub fn apply_scale(&mut self, scale: f64) -> Result<()> {
        if !(scale > 0.0 && scale <= 1.0) {
            return Err(Error::Usage(format!("--scale must lie in (0, 1], got {}", scale)));
        }
        if scale == 1.0 {
            return Ok(());
        }
        let decades = scale.log10();
        let linear = |v: usize| ((v as f64 * scale).round() as usize).max(1);
        let halving = |v: usize| ((v as f64 * 2f64.powf(decades)).round() as usize).max(2);
        let quartering = |v: usize| ((v as f64 * 4f64.powf(decades)).round() as usize).max(8);
        self.grid.steps = linear(self.grid.steps);
        self.grid.dt = None;
        self.stratification.cubes_per_dim = halving(self.stratification.cubes_per_dim);
        self.stratification.samples_per_cube = quartering(self.stratification.samples_per_cube);
        self.valuation.paths_per_run = linear(self.valuation.paths_per_run);
        self.valuation.stopping_paths = linear(self.valuation.stopping_paths);
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.time_grid();
        grid.validate()?;
        if let Some(dt) = self.grid.dt {
            if dt != grid.dt() {
                return Err(Error::Config(format!(
                    "grid.dt = {} does not equal horizon/steps = {}",
                    dt,
                    grid.dt()
                )));
            }
        }
        self.initial_state().validate()?;
        self.stratification().validate()?;
        self.model_params().validate()?;
        self.economic_params(false).validate()?;
        self.economic_params(true).validate()?;
        self.growth_curve().validate()?;
        self.uncertainty_box().validate()?;
        if self.stratification.samples_per_cube < 2 * self.solver.basis.dim() {
            return Err(Error::Config(
                "stratification.samples_per_cube must be at least twice the basis dimension".into(),
            ));
        }
        if !(self.solver.tol_reflect > 0.0) || !(self.solver.price_floor > 0.0) {
            return Err(Error::Config("solver tolerances must be positive".into()));
        }
        if self.valuation.runs == 0
            || self.valuation.paths_per_run == 0
            || self.valuation.stopping_paths == 0
        {
            return Err(Error::Config("valuation run and path counts must be positive".into()));
        }
        if !(self.estimation.weekly_dt > 0.0) {
            return Err(Error::Config("estimation.weekly_dt must be positive".into()));
        }
        if self.simulate.paths == 0 {
            return Err(Error::Config("simulate.paths must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_match_reference_values() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.grid.steps, 3000);
        assert_eq!(cfg.time_grid().dt(), 0.05);
        assert_eq!(cfg.initial.price, 600.0);
        assert_eq!(cfg.stratification.cubes_per_dim, 80);
        assert_eq!(cfg.model.r, 0.0231);
        assert_eq!(cfg.economic.harvest_cost, 127.74);
        assert_eq!(cfg.uncertainty.lambda, [0.1255, 0.3528]);
    }

    #[test]
    fn desk_scale_matches_documented_preset() {
        let mut cfg = RunConfig::default();
        cfg.apply_scale(0.1).unwrap();
        assert_eq!(cfg.grid.steps, 300);
        assert_eq!(cfg.stratification.cubes_per_dim, 40);
        assert_eq!(cfg.stratification.samples_per_cube, 250);
        assert_eq!(cfg.valuation.stopping_paths, 10_000);
        assert_eq!(cfg.valuation.paths_per_run, 100);
        assert_eq!(cfg.valuation.runs, 10);
        assert!(cfg.apply_scale(0.0).is_err());
        assert!(cfg.apply_scale(1.5).is_err());
    }

    #[test]
    fn toml_round_trip_is_identical() {
        let mut cfg = RunConfig::default();
        cfg.run.seed = 1234;
        cfg.apply_scale(0.1).unwrap();
        let dumped = cfg.to_toml();
        let reloaded: RunConfig = toml::from_str(&dumped).unwrap();
        assert_eq!(cfg, reloaded);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "[grid]\nhorizon = 150.0\nsteps = 3000\nbogus = 1\n";
        let got: std::result::Result<RunConfig, _> = toml::from_str(text);
        assert!(got.is_err());
        let text2 = "[nonsense]\nx = 1\n";
        let got2: std::result::Result<RunConfig, _> = toml::from_str(text2);
        assert!(got2.is_err());
    }

    #[test]
    fn explicit_dt_must_be_consistent() {
        let ok = "[grid]\nhorizon = 150.0\nsteps = 3000\ndt = 0.05\n";
        let cfg: RunConfig = toml::from_str(ok).unwrap();
        cfg.validate().unwrap();
        let bad = "[grid]\nhorizon = 150.0\nsteps = 3000\ndt = 0.06\n";
        let cfg: RunConfig = toml::from_str(bad).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn scenario_configs_share_grid_and_differ_in_driver_inputs() {
        let cfg = RunConfig::default();
        let a = cfg.solver_config(Scenario::Conservative, false, false);
        let b = cfg.solver_config(Scenario::Optimistic, false, false);
        assert_eq!(a.grid, b.grid);
        assert_eq!(a.strat, b.strat);
        assert_ne!(a.scenario, b.scenario);
        let c = cfg.solver_config(Scenario::Conservative, true, false);
        assert_eq!(c.econ.amenity, 47.54);
        let d = cfg.solver_config(Scenario::Conservative, false, true);
        assert_eq!(d.uncertainty.kappa_lo, cfg.model.kappa_d);
        assert_eq!(d.uncertainty.lambda_lo, cfg.uncertainty.lambda[0]);
    }
}
