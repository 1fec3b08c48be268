//! Forward simulation: Euler discretization of the risk-neutral state
//! dynamics, reproducible path simulation, and per-hypercube stratified
//! sampling of states with a truncated logistic law.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, StateVec};
use crate::rng::{self, domain};

/// Default floor applied when an Euler price step crosses zero.
pub const DEFAULT_PRICE_FLOOR: f64 = 1e-8;

/// Equidistant time grid on `[0, horizon]` with `steps` intervals.
///
/// `dt()` is the single definition of the step size used everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Self {
        TimeGrid { horizon, steps }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::InvalidParam("time grid needs at least one step".into()));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidParam(format!("horizon must be > 0, got {}", self.horizon)));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Time at grid index `i` (0 <= i <= steps).
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt()
    }
}

/// Stratification of the `(log price, convenience yield)` domain into
/// `cubes_per_dim^2` equal hypercubes, with a logistic sampling law whose
/// 0.1%/99.9% quantiles match the domain endpoints.
///
/// Cube index layout is row-major: `j = price_cell * cubes_per_dim + delta_cell`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stratification {
    /// Log-price domain `[E1, E2]`.
    pub log_price_range: (f64, f64),
    /// Convenience-yield domain `[E3, E4]`.
    pub delta_range: (f64, f64),
    /// Cubes per dimension (J).
    pub cubes_per_dim: usize,
    /// Stratified samples per cube (M).
    pub samples_per_cube: usize,
    /// Logistic location per dimension (log price, delta).
    pub logistic_loc: (f64, f64),
    /// Logistic scale per dimension (log price, delta).
    pub logistic_scale: (f64, f64),
}

/// `ln(0.999/0.001)`: half-width of the standard logistic 0.1%-99.9% band.
const LOGISTIC_TAIL_HALFWIDTH: f64 = 6.906754778648554;

impl Stratification {
    /// Builds a stratification with the default logistic location (domain
    /// midpoint) and scale (domain covers the 0.1%-99.9% quantile range).
    pub fn new(
        log_price_range: (f64, f64),
        delta_range: (f64, f64),
        cubes_per_dim: usize,
        samples_per_cube: usize,
    ) -> Self {
        let loc = (
            0.5 * (log_price_range.0 + log_price_range.1),
            0.5 * (delta_range.0 + delta_range.1),
        );
        let scale = (
            0.5 * (log_price_range.1 - log_price_range.0) / LOGISTIC_TAIL_HALFWIDTH,
            0.5 * (delta_range.1 - delta_range.0) / LOGISTIC_TAIL_HALFWIDTH,
        );
        Stratification {
            log_price_range,
            delta_range,
            cubes_per_dim,
            samples_per_cube,
            logistic_loc: loc,
            logistic_scale: scale,
        }
    }

    /// The configuration used in the full-scale experiments.
    pub fn reference() -> Self {
        Stratification::new((-2.5, 8.5), (-2.0, 2.0), 80, 1000)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.log_price_range.0 < self.log_price_range.1) {
            return Err(Error::InvalidParam("log-price domain must satisfy E1 < E2".into()));
        }
        if !(self.delta_range.0 < self.delta_range.1) {
            return Err(Error::InvalidParam("delta domain must satisfy E3 < E4".into()));
        }
        if self.cubes_per_dim < 1 {
            return Err(Error::InvalidParam("need at least one cube per dimension".into()));
        }
        if !(self.logistic_scale.0 > 0.0 && self.logistic_scale.1 > 0.0) {
            return Err(Error::InvalidParam("logistic scales must be positive".into()));
        }
        Ok(())
    }

    pub fn cube_count(&self) -> usize {
        self.cubes_per_dim * self.cubes_per_dim
    }

    /// Rectangle of cube `j` as `((p_lo, p_hi), (d_lo, d_hi))` in
    /// (log price, delta) coordinates.
    pub fn cube_bounds(&self, j: usize) -> Result<((f64, f64), (f64, f64))> {
        if j >= self.cube_count() {
            return Err(Error::InvalidParam(format!(
                "cube index {} out of range (J^2 = {})",
                j,
                self.cube_count()
            )));
        }
        let jj = self.cubes_per_dim;
        let (pi, di) = (j / jj, j % jj);
        let pw = (self.log_price_range.1 - self.log_price_range.0) / jj as f64;
        let dw = (self.delta_range.1 - self.delta_range.0) / jj as f64;
        let p_lo = self.log_price_range.0 + pi as f64 * pw;
        let d_lo = self.delta_range.0 + di as f64 * dw;
        Ok(((p_lo, p_lo + pw), (d_lo, d_lo + dw)))
    }

    /// Index of the cube containing `(log price, delta)`; out-of-domain
    /// points are clamped to the nearest boundary cube.
    pub fn locate_cube(&self, state: &StateVec) -> usize {
        let jj = self.cubes_per_dim;
        let cell = |x: f64, lo: f64, hi: f64| -> usize {
            let w = (hi - lo) / jj as f64;
            let raw = ((x - lo) / w).floor();
            (raw.max(0.0) as usize).min(jj - 1)
        };
        let pi = cell(state.log_price(), self.log_price_range.0, self.log_price_range.1);
        let di = cell(state.delta, self.delta_range.0, self.delta_range.1);
        pi * jj + di
    }
}

fn logistic_cdf(x: f64, loc: f64, scale: f64) -> f64 {
    1.0 / (1.0 + (-(x - loc) / scale).exp())
}

fn logistic_quantile(p: f64, loc: f64, scale: f64) -> f64 {
    loc + scale * (p / (1.0 - p)).ln()
}

/// Truncated-logistic CDF on `[lo, hi]`; the distributional oracle for
/// stratified samples.
pub fn truncated_logistic_cdf(x: f64, lo: f64, hi: f64, loc: f64, scale: f64) -> f64 {
    let flo = logistic_cdf(lo, loc, scale);
    let fhi = logistic_cdf(hi, loc, scale);
    ((logistic_cdf(x, loc, scale) - flo) / (fhi - flo)).clamp(0.0, 1.0)
}

/// Draws one coordinate from the logistic law conditioned to `[lo, hi]` via
/// inverse CDF on the restricted quantile band.
fn sample_truncated_logistic<R: Rng>(rng: &mut R, lo: f64, hi: f64, loc: f64, scale: f64) -> f64 {
    let flo = logistic_cdf(lo, loc, scale);
    let fhi = logistic_cdf(hi, loc, scale);
    let u: f64 = rng.gen_range(flo..fhi);
    logistic_quantile(u, loc, scale).clamp(lo, hi)
}

/// Generates `count` states inside cube `j`, each coordinate drawn from the
/// logistic law conditioned to the cube's interval.
pub fn stratified_sample(
    j: usize,
    count: usize,
    strat: &Stratification,
    seed: u64,
) -> Result<Vec<StateVec>> {
    stratified_sample_at(j, count, strat, seed, 0)
}

/// Same as [`stratified_sample`] with an extra time index in the stream key,
/// used by the backward solver so every (time, cube) pair has its own stream.
pub fn stratified_sample_at(
    j: usize,
    count: usize,
    strat: &Stratification,
    seed: u64,
    time_index: usize,
) -> Result<Vec<StateVec>> {
    let ((p_lo, p_hi), (d_lo, d_hi)) = strat.cube_bounds(j)?;
    let mut rng = rng::stream(seed, domain::STRATA, &[time_index as u64, j as u64]);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let p = sample_truncated_logistic(&mut rng, p_lo, p_hi, strat.logistic_loc.0, strat.logistic_scale.0);
        let d = sample_truncated_logistic(&mut rng, d_lo, d_hi, strat.logistic_loc.1, strat.logistic_scale.1);
        out.push(StateVec::from_log_price(d, p));
    }
    Ok(out)
}

/// One Euler step of the risk-neutral dynamics.
///
/// `dw = (g1, g2)` are the Brownian increments over the step, i.e. each is
/// `N(0, dt)` and independent. Prices crossing zero are floored at
/// `price_floor`; the boolean reports whether flooring occurred.
pub fn euler_step(
    state: &StateVec,
    dt: f64,
    dw: (f64, f64),
    params: &ModelParams,
    price_floor: f64,
) -> (StateVec, bool) {
    let delta = state.delta + params.kappa_d * (params.mu_d - state.delta) * dt + params.sigma_d * dw.0;
    let rho_bar = (1.0 - params.rho * params.rho).sqrt();
    let raw = state.price
        + (params.r - state.delta) * state.price * dt
        + params.sigma_p * state.price * (params.rho * dw.0 + rho_bar * dw.1);
    let floored = raw < price_floor;
    let price = if floored { price_floor } else { raw };
    (StateVec { delta, price }, floored)
}

/// Simulated paths stored as a dense `(path, time index)` matrix.
#[derive(Debug, Clone)]
pub struct PathSet {
    states: Vec<StateVec>,
    pub n_paths: usize,
    /// Number of stored time points per path (steps + 1).
    pub n_times: usize,
    pub seed: u64,
    /// Total number of Euler steps where the price floor engaged.
    pub floored_steps: u64,
}

impl PathSet {
    /// Wraps externally produced states as a path set; `states` is row-major
    /// with `n_times` consecutive entries per path.
    pub fn from_states(states: Vec<StateVec>, n_times: usize, seed: u64) -> Result<Self> {
        if n_times < 2 || states.is_empty() || states.len() % n_times != 0 {
            return Err(Error::InvalidParam(format!(
                "state buffer of {} entries does not form paths of {} time points",
                states.len(),
                n_times
            )));
        }
        for s in &states {
            s.validate()?;
        }
        let n_paths = states.len() / n_times;
        Ok(PathSet { states, n_paths, n_times, seed, floored_steps: 0 })
    }

    pub fn state(&self, path: usize, i: usize) -> StateVec {
        self.states[path * self.n_times + i]
    }

    pub fn path(&self, path: usize) -> &[StateVec] {
        &self.states[path * self.n_times..(path + 1) * self.n_times]
    }

    /// Fraction of Euler steps that hit the price floor.
    pub fn floored_fraction(&self) -> f64 {
        let total = (self.n_paths * (self.n_times - 1)) as f64;
        self.floored_steps as f64 / total
    }
}

/// Simulates one full path into `buf` (length `steps + 1`) using the
/// per-path RNG stream; returns the number of floored steps.
pub fn simulate_path_into(
    buf: &mut [StateVec],
    path_index: u64,
    rng_domain: u64,
    stream_indices: &[u64],
    grid: &TimeGrid,
    initial: StateVec,
    params: &ModelParams,
    seed: u64,
    price_floor: f64,
) -> u64 {
    let mut idx = Vec::with_capacity(stream_indices.len() + 1);
    idx.extend_from_slice(stream_indices);
    idx.push(path_index);
    let mut rng = rng::stream(seed, rng_domain, &idx);
    let dt = grid.dt();
    let sdt = dt.sqrt();
    let mut state = initial;
    let mut floored = 0u64;
    buf[0] = state;
    for i in 0..grid.steps {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let (next, f) = euler_step(&state, dt, (z1 * sdt, z2 * sdt), params, price_floor);
        if f {
            floored += 1;
        }
        state = next;
        buf[i + 1] = state;
    }
    floored
}

/// Simulates `n_paths` full paths from `initial`. Path `p`, step `i` is
/// reproducible independently of `n_paths`: each path draws from its own
/// stream keyed by `(seed, PATH domain, p)`.
pub fn simulate_paths(
    n_paths: usize,
    grid: &TimeGrid,
    initial: StateVec,
    params: &ModelParams,
    seed: u64,
) -> Result<PathSet> {
    grid.validate()?;
    initial.validate()?;
    params.validate()?;
    if n_paths < 1 {
        return Err(Error::InvalidParam("n_paths must be >= 1".into()));
    }
    let n_times = grid.steps + 1;
    let mut states = vec![StateVec::new(0.0, 1.0); n_paths * n_times];
    use rayon::prelude::*;
    let floored: u64 = states
        .par_chunks_mut(n_times)
        .enumerate()
        .map(|(p, buf)| {
            simulate_path_into(
                buf,
                p as u64,
                domain::PATH,
                &[],
                grid,
                initial,
                params,
                seed,
                DEFAULT_PRICE_FLOOR,
            )
        })
        .sum();
    Ok(PathSet { states, n_paths, n_times, seed, floored_steps: floored })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kalman::futures_price;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn table2() -> ModelParams {
        ModelParams::reference()
    }

    #[test]
    fn grid_dt_and_times() {
        let g = TimeGrid::new(150.0, 3000);
        assert_eq!(g.dt(), 150.0 / 3000.0);
        assert_eq!(g.time(0), 0.0);
        assert_eq!(g.time(3000), 150.0 * (3000.0 / 3000.0));
        assert!(TimeGrid::new(1.0, 0).validate().is_err());
    }

    #[test]
    fn euler_zero_noise_fixed_point_of_drift() {
        let p = table2();
        let s = StateVec::new(p.mu_d, 600.0);
        let (next, _) = euler_step(&s, 0.05, (0.0, 0.0), &p, DEFAULT_PRICE_FLOOR);
        assert_eq!(next.delta, p.mu_d);
    }

    #[test]
    fn euler_zero_noise_deterministic_price() {
        let p = table2();
        let s = StateVec::new(-0.3, 412.0);
        let dt = 0.01;
        let (next, _) = euler_step(&s, dt, (0.0, 0.0), &p, DEFAULT_PRICE_FLOOR);
        assert!((next.price - s.price * (1.0 + (p.r - s.delta) * dt)).abs() < 1e-10);
    }

    #[test]
    fn euler_arithmetic_example() {
        let p = table2();
        let s = StateVec::new(-0.01, 600.0);
        let (next, floored) = euler_step(&s, 0.05, (0.0, 0.0), &p, DEFAULT_PRICE_FLOOR);
        assert!(!floored);
        assert!((next.delta - (-0.00952795)).abs() < 1e-12);
        assert!((next.price - 600.993).abs() < 1e-10);
    }

    #[test]
    fn euler_floors_price_at_epsilon() {
        let p = table2();
        let s = StateVec::new(0.0, 100.0);
        // A -20 sigma shock over a large step forces the raw price negative.
        let (next, floored) = euler_step(&s, 1.0, (0.0, -20.0), &p, DEFAULT_PRICE_FLOOR);
        assert!(floored);
        assert_eq!(next.price, DEFAULT_PRICE_FLOOR);
    }

    #[test]
    fn deterministic_one_step_error_decays_quadratically() {
        // With zero volatility the Euler step approximates the ODE
        // delta' = kappa (mu - delta), p' = (r - delta) p. Halving dt must
        // shrink the one-step error by about 4x.
        let mut p = table2();
        p.sigma_p = 1e-300; // keep invariants (> 0) while removing noise
        p.sigma_d = 1e-300;
        let s0 = StateVec::new(-0.35, 500.0);

        let exact_delta = |t: f64| p.mu_d + (s0.delta - p.mu_d) * (-p.kappa_d * t).exp();
        // Price ODE solved by quadrature of delta(t).
        let exact_price = |t: f64| {
            let n = 20_000;
            let h = t / n as f64;
            let mut integral = 0.0;
            for k in 0..n {
                let a = exact_delta(k as f64 * h);
                let b = exact_delta((k + 1) as f64 * h);
                integral += 0.5 * (a + b) * h;
            }
            s0.price * ((p.r * t) - integral).exp()
        };

        let step_err = |dt: f64| {
            let (s1, _) = euler_step(&s0, dt, (0.0, 0.0), &p, DEFAULT_PRICE_FLOOR);
            let ed = (s1.delta - exact_delta(dt)).abs();
            let ep = (s1.price - exact_price(dt)).abs() / s0.price;
            ed.max(ep)
        };

        let e1 = step_err(0.2);
        let e2 = step_err(0.1);
        let ratio = e1 / e2;
        assert!(
            (3.0..5.0).contains(&ratio),
            "one-step error should decay ~quadratically, ratio {}",
            ratio
        );
    }

    #[test]
    fn zero_volatility_paths_follow_ode() {
        let mut p = table2();
        p.sigma_p = 1e-300;
        p.sigma_d = 1e-300;
        let grid = TimeGrid::new(2.0, 400);
        let s0 = StateVec::new(-0.01, 600.0);
        let paths = simulate_paths(3, &grid, s0, &p, 7).unwrap();
        // All paths identical and equal to the deterministic recursion.
        let mut s = s0;
        for i in 0..=grid.steps {
            for path in 0..3 {
                let got = paths.state(path, i);
                assert!((got.delta - s.delta).abs() < 1e-12);
                assert!((got.price - s.price).abs() < 1e-9);
            }
            if i < grid.steps {
                s = euler_step(&s, grid.dt(), (0.0, 0.0), &p, DEFAULT_PRICE_FLOOR).0;
            }
        }
    }

    #[test]
    fn same_seed_gives_bit_identical_paths() {
        let p = table2();
        let grid = TimeGrid::new(1.0, 50);
        let s0 = StateVec::new(-0.01, 600.0);
        let a = simulate_paths(20, &grid, s0, &p, 99).unwrap();
        let b = simulate_paths(20, &grid, s0, &p, 99).unwrap();
        for path in 0..20 {
            for i in 0..=grid.steps {
                assert_eq!(a.state(path, i).price.to_bits(), b.state(path, i).price.to_bits());
                assert_eq!(a.state(path, i).delta.to_bits(), b.state(path, i).delta.to_bits());
            }
        }
        // Paths are independent of the total path count.
        let c = simulate_paths(5, &grid, s0, &p, 99).unwrap();
        for path in 0..5 {
            assert_eq!(a.state(path, 30).price.to_bits(), c.state(path, 30).price.to_bits());
        }
    }

    #[test]
    fn terminal_mean_matches_futures_price() {
        // Martingale oracle: E^Q[P_tau] equals the closed-form futures price.
        let p = table2();
        let s0 = StateVec::new(-0.01, 600.0);
        for tau in [0.1f64, 0.25, 0.5] {
            let steps = (tau * 500.0).round() as usize;
            let grid = TimeGrid::new(tau, steps);
            let paths = simulate_paths(100_000, &grid, s0, &p, 2024).unwrap();
            let n = paths.n_paths;
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for m in 0..n {
                let x = paths.state(m, grid.steps).price;
                sum += x;
                sumsq += x * x;
            }
            let mean = sum / n as f64;
            let var = (sumsq / n as f64 - mean * mean).max(0.0);
            let se = (var / n as f64).sqrt();
            let target = futures_price(&s0, tau, &p);
            assert!(
                (mean - target).abs() < 3.0 * se,
                "tau={}: MC mean {} vs futures {} (se {})",
                tau,
                mean,
                target,
                se
            );
        }
    }

    #[test]
    fn stratified_samples_stay_inside_their_cube() {
        let strat = Stratification::new((-2.5, 8.5), (-2.0, 2.0), 8, 64);
        for j in [0, 5, 17, 63] {
            let ((p_lo, p_hi), (d_lo, d_hi)) = strat.cube_bounds(j).unwrap();
            for s in stratified_sample(j, 64, &strat, 11).unwrap() {
                let lp = s.log_price();
                assert!(lp >= p_lo && lp <= p_hi);
                assert!(s.delta >= d_lo && s.delta <= d_hi);
            }
        }
        assert!(stratified_sample(64, 4, &strat, 1).is_err());
    }

    #[test]
    fn single_cube_samples_match_truncated_logistic() {
        // Kolmogorov-Smirnov at the 1% level against the inverse-CDF oracle.
        let strat = Stratification::new((-2.5, 8.5), (-2.0, 2.0), 1, 4);
        let n = 100_000;
        let samples = stratified_sample(0, n, &strat, 5).unwrap();
        let mut lp: Vec<f64> = samples.iter().map(|s| s.log_price()).collect();
        lp.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut dmax: f64 = 0.0;
        for (k, x) in lp.iter().enumerate() {
            let f = truncated_logistic_cdf(*x, -2.5, 8.5, strat.logistic_loc.0, strat.logistic_scale.0);
            let lo = k as f64 / n as f64;
            let hi = (k + 1) as f64 / n as f64;
            dmax = dmax.max((f - lo).abs()).max((f - hi).abs());
        }
        let crit = 1.628 / (n as f64).sqrt();
        assert!(dmax < crit, "KS statistic {} exceeds 1% critical value {}", dmax, crit);
    }

    #[test]
    fn cube_samples_cover_the_domain() {
        let strat = Stratification::new((-2.5, 8.5), (-2.0, 2.0), 4, 32);
        let mut p_min = f64::INFINITY;
        let mut p_max = f64::NEG_INFINITY;
        let mut d_min = f64::INFINITY;
        let mut d_max = f64::NEG_INFINITY;
        for j in 0..strat.cube_count() {
            for s in stratified_sample(j, 32, &strat, 3).unwrap() {
                p_min = p_min.min(s.log_price());
                p_max = p_max.max(s.log_price());
                d_min = d_min.min(s.delta);
                d_max = d_max.max(s.delta);
            }
        }
        // Union of per-cube bounding boxes spans (nearly) the full domain.
        let pw = 11.0 / 4.0;
        let dw = 4.0 / 4.0;
        assert!(p_min < -2.5 + pw && p_max > 8.5 - pw);
        assert!(d_min < -2.0 + dw && d_max > 2.0 - dw);
    }

    #[test]
    fn locate_cube_center_and_clamping() {
        let strat = Stratification::new((-2.5, 8.5), (-2.0, 2.0), 5, 8);
        // Exact domain center lands in the center cube (index 2, 2).
        let center = StateVec::from_log_price(0.0, 3.0);
        assert_eq!(strat.locate_cube(&center), 2 * 5 + 2);
        // Far out-of-domain log price clamps into the last price column.
        let far = StateVec::from_log_price(0.0, 8.5 + 5.0);
        assert_eq!(strat.locate_cube(&far) / 5, 4);
        let low = StateVec::from_log_price(-9.0, -40.0);
        assert_eq!(strat.locate_cube(&low), 0);
    }

    #[test]
    fn stratified_sample_round_trips_through_locate_cube() {
        let strat = Stratification::new((-2.5, 8.5), (-2.0, 2.0), 13, 16);
        let mut rng = StdRng::seed_from_u64(77);
        for _ in 0..200 {
            let j = rng.gen_range(0..strat.cube_count());
            for s in stratified_sample(j, 16, &strat, 23).unwrap() {
                assert_eq!(strat.locate_cube(&s), j, "sample from cube {} relocated", j);
            }
        }
    }

    #[test]
    fn flooring_is_rare_at_reference_configuration() {
        let p = table2();
        let grid = TimeGrid::new(150.0, 3000);
        let paths = simulate_paths(200, &grid, StateVec::new(-0.01, 600.0), &p, 31).unwrap();
        for m in 0..paths.n_paths {
            for i in 0..paths.n_times {
                assert!(paths.state(m, i).price > 0.0);
            }
        }
        assert!(
            paths.floored_fraction() < 1e-4,
            "floored fraction {} too large",
            paths.floored_fraction()
        );
    }
}
