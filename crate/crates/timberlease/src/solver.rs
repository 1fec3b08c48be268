//! Backward stratified-regression solver for the reflected BSDE: terminal
//! condition, per-cube least-squares estimation of the gradient and the
//! continuation value, extremal-driver evaluation over the uncertainty box,
//! reflection at the obstacle, and stopping-boundary extraction.
//!
//! The scheme walks the time grid backward. At each step it draws stratified
//! states per hypercube, simulates one Euler step, regresses the
//! next-step value times the scaled Brownian increment to estimate the
//! gradient, evaluates the (extremal) driver, and regresses the driver-adjusted
//! value to obtain the continuation coefficients. Recovered values are the
//! continuation fit reflected at the obstacle.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    driver_extremal, driver_f, payoff, ControlPoint, DriverMode, EconomicParams, GrowthCurve,
    ModelParams, StateVec, UncertaintyBox,
};
use crate::sim::{euler_step, stratified_sample_at, Stratification, TimeGrid};
use crate::rng::{self, domain};
use rand::Rng;
use rand_distr::StandardNormal;

/// Gram-matrix condition threshold beyond which ridge regularization kicks in.
const COND_LIMIT: f64 = 1e12;
/// Ridge size relative to the Gram diagonal.
const RIDGE_REL: f64 = 1e-10;

/// Valuation scenario: which generator drives the backward recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Conservative,
    #[serde(rename = "none")]
    NoUncertainty,
    Optimistic,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Conservative => "conservative",
            Scenario::NoUncertainty => "none",
            Scenario::Optimistic => "optimistic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "conservative" => Ok(Scenario::Conservative),
            "none" => Ok(Scenario::NoUncertainty),
            "optimistic" => Ok(Scenario::Optimistic),
            other => Err(Error::Usage(format!(
                "unknown scenario '{}'; expected conservative|none|optimistic",
                other
            ))),
        }
    }
}

/// Local regression basis within each hypercube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisOrder {
    /// Cube-mean fit.
    Constant,
    /// Affine fit in (log price, yield), centered at the cube midpoint.
    Affine,
}

impl BasisOrder {
    pub fn dim(&self) -> usize {
        match self {
            BasisOrder::Constant => 1,
            BasisOrder::Affine => 3,
        }
    }
}

/// A stopping problem the backward scheme can solve: an obstacle (payoff of
/// stopping) and the generator of the reflected BSDE.
pub trait StoppingProblem: Sync {
    fn obstacle(&self, t: f64, state: &StateVec) -> f64;
    fn driver(&self, t: f64, state: &StateVec, y: f64, z: (f64, f64)) -> f64;
}

/// The forest-lease stopping problem: instant harvesting revenue as the
/// obstacle and the scenario-dependent generator.
#[derive(Debug, Clone, Copy)]
pub struct LeaseProblem {
    pub scenario: Scenario,
    pub uncertainty: UncertaintyBox,
    pub econ: EconomicParams,
    pub params: ModelParams,
    pub growth: GrowthCurve,
}

impl StoppingProblem for LeaseProblem {
    fn obstacle(&self, t: f64, state: &StateVec) -> f64 {
        payoff(t, state, &self.econ, &self.growth)
    }

    fn driver(&self, t: f64, state: &StateVec, y: f64, z: (f64, f64)) -> f64 {
        match self.scenario {
            Scenario::NoUncertainty => {
                let reference = ControlPoint::reference(&self.params);
                driver_f(t, state, y, z, &reference, &self.econ, &self.params)
            }
            Scenario::Optimistic => driver_extremal(
                DriverMode::Sup,
                t,
                state,
                y,
                z,
                &self.uncertainty,
                &self.econ,
                &self.params,
            ),
            Scenario::Conservative => driver_extremal(
                DriverMode::Inf,
                t,
                state,
                y,
                z,
                &self.uncertainty,
                &self.econ,
                &self.params,
            ),
        }
    }
}

/// Full solver configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub grid: TimeGrid,
    pub strat: Stratification,
    pub basis: BasisOrder,
    pub scenario: Scenario,
    pub uncertainty: UncertaintyBox,
    pub econ: EconomicParams,
    pub params: ModelParams,
    pub growth: GrowthCurve,
    pub seed: u64,
    pub price_floor: f64,
    pub tol_reflect: f64,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.strat.validate()?;
        self.uncertainty.validate()?;
        self.econ.validate()?;
        self.params.validate()?;
        self.growth.validate()?;
        if self.strat.samples_per_cube < 2 * self.basis.dim() {
            return Err(Error::InvalidParam(format!(
                "samples per cube ({}) must be at least twice the basis dimension ({})",
                self.strat.samples_per_cube,
                self.basis.dim()
            )));
        }
        if !(self.price_floor > 0.0) {
            return Err(Error::InvalidParam("price_floor must be positive".into()));
        }
        if !(self.tol_reflect > 0.0) {
            return Err(Error::InvalidParam("tol_reflect must be positive".into()));
        }
        Ok(())
    }

    pub fn lease_problem(&self) -> LeaseProblem {
        LeaseProblem {
            scenario: self.scenario,
            uncertainty: self.uncertainty,
            econ: self.econ,
            params: self.params,
            growth: self.growth,
        }
    }

    /// Stable FNV-1a hash of every field, recorded in stack dumps so a
    /// serialized stack can be matched to the configuration that built it.
    pub fn config_hash(&self) -> u64 {
        let f = f64::to_bits;
        let words = [
            f(self.grid.horizon),
            self.grid.steps as u64,
            f(self.strat.log_price_range.0),
            f(self.strat.log_price_range.1),
            f(self.strat.delta_range.0),
            f(self.strat.delta_range.1),
            self.strat.cubes_per_dim as u64,
            self.strat.samples_per_cube as u64,
            f(self.strat.logistic_loc.0),
            f(self.strat.logistic_loc.1),
            f(self.strat.logistic_scale.0),
            f(self.strat.logistic_scale.1),
            self.basis.dim() as u64,
            match self.scenario {
                Scenario::Conservative => 0,
                Scenario::NoUncertainty => 1,
                Scenario::Optimistic => 2,
            },
            f(self.uncertainty.kappa_lo),
            f(self.uncertainty.kappa_hi),
            f(self.uncertainty.mu_lo),
            f(self.uncertainty.mu_hi),
            f(self.uncertainty.lambda_lo),
            f(self.uncertainty.lambda_hi),
            f(self.econ.harvest_cost),
            f(self.econ.amenity),
            f(self.econ.grace_age),
            f(self.econ.volume_factor),
            f(self.params.sigma_p),
            f(self.params.sigma_d),
            f(self.params.kappa_d),
            f(self.params.mu_d),
            f(self.params.rho),
            f(self.params.r),
            f(self.params.lambda_q),
            f(self.growth.scale),
            f(self.growth.coefficient),
            f(self.growth.exponent),
            f(self.growth.lower_knot),
            f(self.growth.upper_knot),
            self.seed,
            f(self.price_floor),
            f(self.tol_reflect),
        ];
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for word in words {
            for byte in word.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

/// Per-time-step, per-cube regression coefficients: the continuation fit
/// `b_y` and the two gradient fits `b_z1`, `b_z2`. Time indices run from 0
/// to `steps - 1`; the terminal rule at `steps` is the obstacle itself.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionStack {
    pub grid: TimeGrid,
    pub strat: Stratification,
    pub basis: BasisOrder,
    pub tol_reflect: f64,
    pub config_hash: u64,
    /// Cubes where the regression fell back to the cube-mean fit.
    pub fallback_cubes: u64,
    /// One-step Euler simulations hitting the price floor.
    pub floored_steps: u64,
    coeffs: Vec<f64>,
}

impl RegressionStack {
    fn block(&self, i: usize, j: usize) -> &[f64] {
        let dim = self.basis.dim();
        let stride = 3 * dim;
        let start = (i * self.strat.cube_count() + j) * stride;
        &self.coeffs[start..start + stride]
    }

    /// Basis evaluation centered at the midpoint of cube `j`.
    fn phi(&self, j: usize, state: &StateVec, out: &mut [f64; 3]) -> usize {
        basis_phi(self.basis, &self.strat, j, state, out)
    }

    /// Continuation fit `b_y . phi(state)` at time index `i` (< steps).
    pub fn continuation(&self, i: usize, state: &StateVec) -> f64 {
        debug_assert!(i < self.grid.steps);
        let j = self.strat.locate_cube(state);
        let block = self.block(i, j);
        let mut phi = [0.0; 3];
        let dim = self.phi(j, state, &mut phi);
        dot(&block[..dim], &phi[..dim])
    }

    /// Gradient fit `(b_z1 . phi, b_z2 . phi)` at time index `i`.
    pub fn z_at(&self, i: usize, state: &StateVec) -> (f64, f64) {
        let dim = self.basis.dim();
        let j = self.strat.locate_cube(state);
        let block = self.block(i, j);
        let mut phi = [0.0; 3];
        let d = self.phi(j, state, &mut phi);
        (dot(&block[dim..dim + d], &phi[..d]), dot(&block[2 * dim..2 * dim + d], &phi[..d]))
    }

    /// Raw coefficient block `(b_y, b_z1, b_z2)` for `(i, j)`.
    pub fn coeff_block(&self, i: usize, j: usize) -> (&[f64], &[f64], &[f64]) {
        let dim = self.basis.dim();
        let b = self.block(i, j);
        (&b[..dim], &b[dim..2 * dim], &b[2 * dim..3 * dim])
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn basis_phi(
    basis: BasisOrder,
    strat: &Stratification,
    j: usize,
    state: &StateVec,
    out: &mut [f64; 3],
) -> usize {
    match basis {
        BasisOrder::Constant => {
            out[0] = 1.0;
            1
        }
        BasisOrder::Affine => {
            let ((p_lo, p_hi), (d_lo, d_hi)) = strat
                .cube_bounds(j)
                .expect("cube index produced by locate_cube is always valid");
            // Coordinates are clamped into the cube rectangle: out-of-domain
            // states read the boundary cube's fit at its nearest edge instead
            // of extrapolating the affine fit arbitrarily far.
            out[0] = 1.0;
            out[1] = state.log_price().clamp(p_lo, p_hi) - 0.5 * (p_lo + p_hi);
            out[2] = state.delta.clamp(d_lo, d_hi) - 0.5 * (d_lo + d_hi);
            3
        }
    }
}

/// Reflected value at `(time index, state)`: the continuation fit pushed up
/// to the obstacle; at the terminal index it is the obstacle exactly.
pub fn recover_value<P: StoppingProblem>(
    stack: &RegressionStack,
    problem: &P,
    i: usize,
    state: &StateVec,
) -> f64 {
    let t = stack.grid.time(i);
    let s = problem.obstacle(t, state);
    if i >= stack.grid.steps {
        return s;
    }
    stack.continuation(i, state).max(s)
}

/// Whether the reflected value touches the obstacle at `(i, state)` within
/// the stack's reflection tolerance (relative to `max(1, |obstacle|)`).
pub fn touches_obstacle<P: StoppingProblem>(
    stack: &RegressionStack,
    problem: &P,
    i: usize,
    state: &StateVec,
) -> bool {
    if i >= stack.grid.steps {
        return true;
    }
    let t = stack.grid.time(i);
    let s = problem.obstacle(t, state);
    let gap = stack.continuation(i, state) - s;
    gap <= stack.tol_reflect * s.abs().max(1.0)
}

struct CubeFit {
    coeffs: Vec<f64>,
    fallback: bool,
    floored: u64,
}

/// Rank-revealing normal-equation solve shared by the three per-cube
/// regressions. Applies a relative ridge when conditioning exceeds the
/// limit; reports fallback when the system stays effectively singular.
struct GramSolver {
    inverse: DMatrix<f64>,
    fallback: bool,
}

impl GramSolver {
    fn new(gram: DMatrix<f64>) -> Self {
        let dim = gram.nrows();
        let bounds = |m: &DMatrix<f64>| -> (f64, f64) {
            let eig = m.clone().symmetric_eigenvalues();
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for k in 0..dim {
                lo = lo.min(eig[k]);
                hi = hi.max(eig[k]);
            }
            (lo, hi)
        };
        let (mut lo, mut hi) = bounds(&gram);
        let mut work = gram;
        if !(lo > 0.0) || hi / lo > COND_LIMIT {
            for k in 0..dim {
                work[(k, k)] += RIDGE_REL * work[(k, k)].max(f64::MIN_POSITIVE);
            }
            let (l2, h2) = bounds(&work);
            lo = l2;
            hi = h2;
        }
        if !(lo > 0.0) || hi / lo > COND_LIMIT {
            return GramSolver { inverse: DMatrix::zeros(dim, dim), fallback: true };
        }
        let inverse = work
            .try_inverse()
            .unwrap_or_else(|| DMatrix::zeros(dim, dim));
        GramSolver { inverse, fallback: false }
    }

    fn solve(&self, rhs: &DVector<f64>, targets_mean: f64, out: &mut [f64]) {
        if self.fallback {
            out[0] = targets_mean;
            for v in &mut out[1..] {
                *v = 0.0;
            }
        } else {
            let b = &self.inverse * rhs;
            for (o, v) in out.iter_mut().zip(b.iter()) {
                *o = *v;
            }
        }
    }
}

/// Solves the forest-lease problem defined by the configuration.
pub fn solve(cfg: &SolverConfig) -> Result<RegressionStack> {
    let problem = cfg.lease_problem();
    solve_problem(cfg, &problem)
}

/// Solves an arbitrary stopping problem with the configuration's grid,
/// stratification and forward dynamics. The configuration's scenario and
/// economic fields are ignored in favor of the supplied problem.
pub fn solve_problem<P: StoppingProblem>(cfg: &SolverConfig, problem: &P) -> Result<RegressionStack> {
    cfg.validate()?;
    let n = cfg.grid.steps;
    let jj = cfg.strat.cube_count();
    let m = cfg.strat.samples_per_cube;
    let dim = cfg.basis.dim();
    let stride = 3 * dim;
    let dt = cfg.grid.dt();
    let sqrt_dt = dt.sqrt();

    let mut coeffs = vec![0.0; n * jj * stride];
    let mut fallback_cubes = 0u64;
    let mut floored_steps = 0u64;

    // Copy of the (i+1)-level coefficients; empty at the terminal step.
    let mut next_level: Vec<f64> = Vec::new();

    for i in (0..n).rev() {
        let t_i = cfg.grid.time(i);
        let t_next = cfg.grid.time(i + 1);
        let terminal = i + 1 == n;
        let next_ref: &[f64] = &next_level;

        let fits: Vec<CubeFit> = (0..jj)
            .into_par_iter()
            .map(|j| {
                let xs = stratified_sample_at(j, m, &cfg.strat, cfg.seed, i)
                    .expect("cube index in range");
                let mut rng = rng::stream(cfg.seed, domain::SOLVER_DW, &[i as u64, j as u64]);

                let mut phi = vec![0.0; m * dim];
                let mut scratch = [0.0; 3];
                for (row, x) in xs.iter().enumerate() {
                    let d = basis_phi(cfg.basis, &cfg.strat, j, x, &mut scratch);
                    phi[row * dim..row * dim + d].copy_from_slice(&scratch[..d]);
                }

                // One Euler step per sample and next-step value evaluation.
                let mut dw = vec![(0.0, 0.0); m];
                let mut y_next = vec![0.0; m];
                let mut floored = 0u64;
                for (row, x) in xs.iter().enumerate() {
                    let g1: f64 = rng.sample(StandardNormal);
                    let g2: f64 = rng.sample(StandardNormal);
                    let inc = (g1 * sqrt_dt, g2 * sqrt_dt);
                    dw[row] = inc;
                    let (xn, fl) = euler_step(x, dt, inc, &cfg.params, cfg.price_floor);
                    if fl {
                        floored += 1;
                    }
                    let s_next = problem.obstacle(t_next, &xn);
                    y_next[row] = if terminal {
                        s_next
                    } else {
                        let k = cfg.strat.locate_cube(&xn);
                        let d = basis_phi(cfg.basis, &cfg.strat, k, &xn, &mut scratch);
                        let fit = dot(&next_ref[(k * stride)..(k * stride + d)], &scratch[..d]);
                        fit.max(s_next)
                    };
                }

                // Shared Gram matrix for the three regressions.
                let mut gram = DMatrix::<f64>::zeros(dim, dim);
                for row in 0..m {
                    let p = &phi[row * dim..(row + 1) * dim];
                    for a in 0..dim {
                        for b in a..dim {
                            gram[(a, b)] += p[a] * p[b];
                        }
                    }
                }
                for a in 0..dim {
                    for b in 0..a {
                        gram[(a, b)] = gram[(b, a)];
                    }
                }
                let solver = GramSolver::new(gram);

                let project = |targets: &[f64]| -> (DVector<f64>, f64) {
                    let mut rhs = DVector::zeros(dim);
                    let mut mean = 0.0;
                    for row in 0..m {
                        let p = &phi[row * dim..(row + 1) * dim];
                        for a in 0..dim {
                            rhs[a] += p[a] * targets[row];
                        }
                        mean += targets[row];
                    }
                    (rhs, mean / m as f64)
                };

                let mut block = vec![0.0; stride];

                // Gradient regressions: targets y_{i+1} * dW / dt.
                let tz1: Vec<f64> = (0..m).map(|r| y_next[r] * dw[r].0 / dt).collect();
                let tz2: Vec<f64> = (0..m).map(|r| y_next[r] * dw[r].1 / dt).collect();
                let (rhs1, mean1) = project(&tz1);
                solver.solve(&rhs1, mean1, &mut block[dim..2 * dim]);
                let (rhs2, mean2) = project(&tz2);
                solver.solve(&rhs2, mean2, &mut block[2 * dim..3 * dim]);

                // Driver at (t_i, X_i, y_{i+1}(X_{i+1}), z_i(X_i)), then the
                // continuation regression on y_{i+1} + f dt.
                let ty: Vec<f64> = (0..m)
                    .map(|r| {
                        let p = &phi[r * dim..(r + 1) * dim];
                        let z = (dot(&block[dim..2 * dim], p), dot(&block[2 * dim..3 * dim], p));
                        let f = problem.driver(t_i, &xs[r], y_next[r], z);
                        y_next[r] + f * dt
                    })
                    .collect();
                let (rhs_y, mean_y) = project(&ty);
                solver.solve(&rhs_y, mean_y, &mut block[..dim]);

                CubeFit { coeffs: block, fallback: solver.fallback, floored }
            })
            .collect();

        let mut level = vec![0.0; jj * stride];
        for (j, fit) in fits.into_iter().enumerate() {
            if fit.fallback {
                fallback_cubes += 1;
            }
            floored_steps += fit.floored;
            level[j * stride..(j + 1) * stride].copy_from_slice(&fit.coeffs);
        }
        coeffs[i * jj * stride..(i + 1) * jj * stride].copy_from_slice(&level);
        next_level = level;
    }

    if let Some(pos) = coeffs.iter().position(|c| !c.is_finite()) {
        let stride_jj = jj * stride;
        return Err(Error::Numerical(format!(
            "non-finite regression coefficient at time index {}, cube {}",
            pos / stride_jj,
            (pos % stride_jj) / stride
        )));
    }

    Ok(RegressionStack {
        grid: cfg.grid,
        strat: cfg.strat,
        basis: cfg.basis,
        tol_reflect: cfg.tol_reflect,
        config_hash: cfg.config_hash(),
        fallback_cubes,
        floored_steps,
        coeffs,
    })
}

/// Rectangular evaluation grid over (price, yield) for boundary extraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryGridSpec {
    pub price_range: (f64, f64),
    pub price_count: usize,
    pub delta_range: (f64, f64),
    pub delta_count: usize,
}

impl Default for BoundaryGridSpec {
    fn default() -> Self {
        BoundaryGridSpec {
            price_range: (50.0, 1500.0),
            price_count: 41,
            delta_range: (-2.0, 2.0),
            delta_count: 41,
        }
    }
}

/// Stop/continue classification on a rectangular state grid at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryGrid {
    pub time_index: usize,
    pub time: f64,
    pub prices: Vec<f64>,
    pub deltas: Vec<f64>,
    /// Row-major (price, delta) obstacle values.
    pub payoff: Vec<f64>,
    /// Row-major (price, delta) recovered values.
    pub value: Vec<f64>,
    /// `stop` iff the recovered value equals the payoff within tolerance.
    pub stop: Vec<bool>,
}

impl BoundaryGrid {
    pub fn node(&self, pi: usize, di: usize) -> (f64, f64, f64, f64, bool) {
        let k = pi * self.deltas.len() + di;
        (self.prices[pi], self.deltas[di], self.payoff[k], self.value[k], self.stop[k])
    }
}

/// Classifies each grid node as stop or continue at interior time index `i`.
pub fn extract_boundary<P: StoppingProblem>(
    stack: &RegressionStack,
    problem: &P,
    i: usize,
    spec: &BoundaryGridSpec,
) -> Result<BoundaryGrid> {
    if i == 0 || i >= stack.grid.steps {
        return Err(Error::Usage(format!(
            "boundary time index {} outside the interior grid [1, {}]",
            i,
            stack.grid.steps - 1
        )));
    }
    if spec.price_count < 2 || spec.delta_count < 2 {
        return Err(Error::InvalidParam("boundary grid needs at least 2 nodes per axis".into()));
    }
    let t = stack.grid.time(i);
    let lin = |range: (f64, f64), n: usize, k: usize| {
        range.0 + (range.1 - range.0) * k as f64 / (n - 1) as f64
    };
    let prices: Vec<f64> = (0..spec.price_count).map(|k| lin(spec.price_range, spec.price_count, k)).collect();
    let deltas: Vec<f64> = (0..spec.delta_count).map(|k| lin(spec.delta_range, spec.delta_count, k)).collect();
    let mut payoff_v = Vec::with_capacity(prices.len() * deltas.len());
    let mut value_v = Vec::with_capacity(prices.len() * deltas.len());
    let mut stop_v = Vec::with_capacity(prices.len() * deltas.len());
    for &p in &prices {
        for &d in &deltas {
            let state = StateVec::new(d, p);
            let s = problem.obstacle(t, &state);
            let v = recover_value(stack, problem, i, &state);
            payoff_v.push(s);
            value_v.push(v);
            stop_v.push(v - s <= stack.tol_reflect * s.abs().max(1.0));
        }
    }
    Ok(BoundaryGrid {
        time_index: i,
        time: t,
        prices,
        deltas,
        payoff: payoff_v,
        value: value_v,
        stop: stop_v,
    })
}

/// Writes the stack as a CSV dump with a metadata header; floats use the
/// shortest round-trip representation so reading restores exact bits.
pub fn write_stack_csv(stack: &RegressionStack, path: &std::path::Path) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let dim = stack.basis.dim();
    writeln!(
        f,
        "# n_steps={} cubes_per_dim={} basis_dim={} config_hash={:016x}",
        stack.grid.steps, stack.strat.cubes_per_dim, dim, stack.config_hash
    )?;
    writeln!(
        f,
        "# fallback_cubes={} floored_steps={} tol_reflect={}",
        stack.fallback_cubes, stack.floored_steps, stack.tol_reflect
    )?;
    let mut header = vec!["i".to_string(), "j".to_string()];
    for k in 0..dim {
        header.push(format!("b_y{}", k));
    }
    for k in 0..dim {
        header.push(format!("b_z1_{}", k));
    }
    for k in 0..dim {
        header.push(format!("b_z2_{}", k));
    }
    writeln!(f, "{}", header.join(","))?;
    for i in 0..stack.grid.steps {
        for j in 0..stack.strat.cube_count() {
            let block = stack.block(i, j);
            let mut row = vec![i.to_string(), j.to_string()];
            for v in block {
                row.push(format!("{}", v));
            }
            writeln!(f, "{}", row.join(","))?;
        }
    }
    Ok(())
}

/// Reads a stack dump produced by [`write_stack_csv`], checking that the
/// dump matches the supplied configuration.
pub fn read_stack_csv(path: &std::path::Path, cfg: &SolverConfig) -> Result<RegressionStack> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let meta = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{}: empty stack dump", path.display())))?;
    let mut n_steps = 0usize;
    let mut cubes_per_dim = 0usize;
    let mut basis_dim = 0usize;
    let mut config_hash = 0u64;
    for part in meta.trim_start_matches('#').split_whitespace() {
        let mut kv = part.splitn(2, '=');
        let key = kv.next().unwrap_or("");
        let val = kv.next().unwrap_or("");
        match key {
            "n_steps" => n_steps = val.parse().map_err(|_| Error::Data("bad n_steps".into()))?,
            "cubes_per_dim" => {
                cubes_per_dim = val.parse().map_err(|_| Error::Data("bad cubes_per_dim".into()))?
            }
            "basis_dim" => basis_dim = val.parse().map_err(|_| Error::Data("bad basis_dim".into()))?,
            "config_hash" => {
                config_hash =
                    u64::from_str_radix(val, 16).map_err(|_| Error::Data("bad config_hash".into()))?
            }
            _ => {}
        }
    }
    if n_steps != cfg.grid.steps || cubes_per_dim != cfg.strat.cubes_per_dim || basis_dim != cfg.basis.dim() {
        return Err(Error::Data(format!(
            "{}: stack dump shape ({}, {}, {}) does not match the configuration ({}, {}, {})",
            path.display(),
            n_steps,
            cubes_per_dim,
            basis_dim,
            cfg.grid.steps,
            cfg.strat.cubes_per_dim,
            cfg.basis.dim()
        )));
    }
    if config_hash != cfg.config_hash() {
        return Err(Error::Data(format!(
            "{}: stack dump was built from a different configuration (hash {:016x} vs {:016x})",
            path.display(),
            config_hash,
            cfg.config_hash()
        )));
    }

    let diag = lines
        .next()
        .ok_or_else(|| Error::Data("stack dump missing diagnostics line".into()))?;
    let mut fallback_cubes = 0u64;
    let mut floored_steps = 0u64;
    for part in diag.trim_start_matches('#').split_whitespace() {
        let mut kv = part.splitn(2, '=');
        match kv.next().unwrap_or("") {
            "fallback_cubes" => {
                fallback_cubes = kv.next().unwrap_or("0").parse().unwrap_or(0);
            }
            "floored_steps" => {
                floored_steps = kv.next().unwrap_or("0").parse().unwrap_or(0);
            }
            _ => {}
        }
    }
    let _column_header = lines.next();

    let jj = cfg.strat.cube_count();
    let stride = 3 * cfg.basis.dim();
    let mut coeffs = vec![f64::NAN; cfg.grid.steps * jj * stride];
    let mut seen = 0usize;
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split(',');
        let parse_err = |what: &str| Error::Data(format!("stack dump line {}: bad {}", ln + 4, what));
        let i: usize = it.next().ok_or_else(|| parse_err("i"))?.parse().map_err(|_| parse_err("i"))?;
        let j: usize = it.next().ok_or_else(|| parse_err("j"))?.parse().map_err(|_| parse_err("j"))?;
        if i >= cfg.grid.steps || j >= jj {
            return Err(parse_err("index"));
        }
        let start = (i * jj + j) * stride;
        for k in 0..stride {
            let v: f64 = it
                .next()
                .ok_or_else(|| parse_err("coefficient"))?
                .parse()
                .map_err(|_| parse_err("coefficient"))?;
            coeffs[start + k] = v;
        }
        seen += 1;
    }
    if seen != cfg.grid.steps * jj {
        return Err(Error::Data(format!(
            "stack dump has {} coefficient rows, expected {} (dense (i, j) indexing)",
            seen,
            cfg.grid.steps * jj
        )));
    }
    Ok(RegressionStack {
        grid: cfg.grid,
        strat: cfg.strat,
        basis: cfg.basis,
        tol_reflect: cfg.tol_reflect,
        config_hash,
        fallback_cubes,
        floored_steps,
        coeffs,
    })
}
