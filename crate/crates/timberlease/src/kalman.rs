//! Two-factor futures pricing, Kalman filtering of the latent
//! (convenience yield, log price) state, and maximum-likelihood estimation
//! from a panel of futures prices.
//!
//! State-space form: the transition equation is the Euler discretization of
//! the risk-neutral dynamics in (yield, log price) coordinates; the
//! measurement equation is the log futures pricing formula, affine in the
//! state, with per-contract Gaussian noise.

use nalgebra::{DMatrix, Matrix2, Matrix6, SMatrix, Vector2, Vector6};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ModelParams, StateVec, UncertaintyBox};
use crate::optim::{nelder_mead, NelderMeadOptions, OptimResult};
use crate::rng::{self, domain};

pub const N_CONTRACTS: usize = 6;

const LN_2PI: f64 = 1.8378770664093453;

/// Candidate parameter vector for the likelihood: the five model parameters
/// and the six per-contract measurement noise standard deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoFactorTheta {
    pub sigma_p: f64,
    pub sigma_d: f64,
    pub kappa_d: f64,
    pub mu_d: f64,
    pub rho: f64,
    pub meas_noise: [f64; N_CONTRACTS],
}

pub const THETA_NAMES: [&str; 11] =
    ["sigma_p", "sigma_d", "kappa_d", "mu_d", "rho", "d1", "d2", "d3", "d4", "d5", "d6"];

impl TwoFactorTheta {
    pub fn to_vec(&self) -> [f64; 11] {
        let mut v = [0.0; 11];
        v[0] = self.sigma_p;
        v[1] = self.sigma_d;
        v[2] = self.kappa_d;
        v[3] = self.mu_d;
        v[4] = self.rho;
        v[5..11].copy_from_slice(&self.meas_noise);
        v
    }

    pub fn from_vec(v: &[f64; 11]) -> Self {
        let mut meas = [0.0; N_CONTRACTS];
        meas.copy_from_slice(&v[5..11]);
        TwoFactorTheta {
            sigma_p: v[0],
            sigma_d: v[1],
            kappa_d: v[2],
            mu_d: v[3],
            rho: v[4],
            meas_noise: meas,
        }
    }

    /// Extends to full model parameters with the externally fixed rate and
    /// intensity.
    pub fn with_market(&self, r: f64, lambda_q: f64) -> ModelParams {
        ModelParams {
            sigma_p: self.sigma_p,
            sigma_d: self.sigma_d,
            kappa_d: self.kappa_d,
            mu_d: self.mu_d,
            rho: self.rho,
            r,
            lambda_q,
        }
    }

    fn is_admissible(&self) -> bool {
        self.sigma_p > 0.0
            && self.sigma_d > 0.0
            && self.kappa_d > 0.0
            && self.rho > -1.0
            && self.rho < 1.0
            && self.mu_d.is_finite()
            && self.meas_noise.iter().all(|d| *d > 0.0)
    }
}

/// Deterministic part of the log futures price: `log F = D(tau) - delta *
/// (1 - e^{-kappa tau})/kappa + log P`, with `D` as below.
pub fn futures_log_intercept(
    tau: f64,
    sigma_p: f64,
    sigma_d: f64,
    kappa: f64,
    mu_d: f64,
    rho: f64,
    r: f64,
) -> f64 {
    let e1 = 1.0 - (-kappa * tau).exp();
    let e2 = 1.0 - (-2.0 * kappa * tau).exp();
    (r - mu_d + 0.5 * (sigma_d / kappa).powi(2) - sigma_p * sigma_d * rho / kappa) * tau
        + 0.25 * sigma_d * sigma_d * e2 / kappa.powi(3)
        + (mu_d * kappa + sigma_p * sigma_d * rho - sigma_d * sigma_d / kappa) * e1 / (kappa * kappa)
}

/// Loading of the log futures price on the convenience yield.
pub fn futures_delta_loading(tau: f64, kappa: f64) -> f64 {
    -(1.0 - (-kappa * tau).exp()) / kappa
}

/// Futures price for a contract `tau` years from expiry.
pub fn futures_price(state: &StateVec, tau: f64, params: &ModelParams) -> f64 {
    let d = futures_log_intercept(
        tau,
        params.sigma_p,
        params.sigma_d,
        params.kappa_d,
        params.mu_d,
        params.rho,
        params.r,
    );
    state.price * (futures_delta_loading(tau, params.kappa_d) * state.delta + d).exp()
}

/// Dated panel of six futures contracts: price and time-to-maturity per
/// contract, weekly rows sorted ascending by ISO-8601 date.
#[derive(Debug, Clone, PartialEq)]
pub struct FuturesPanel {
    pub dates: Vec<String>,
    pub prices: Vec<[f64; N_CONTRACTS]>,
    pub ttms: Vec<[f64; N_CONTRACTS]>,
}

impl FuturesPanel {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Data("futures panel has no rows".into()));
        }
        if self.prices.len() != self.len() || self.ttms.len() != self.len() {
            return Err(Error::Data("futures panel columns have mismatched lengths".into()));
        }
        for (i, date) in self.dates.iter().enumerate() {
            if i > 0 && self.dates[i - 1].as_str() >= date.as_str() {
                return Err(Error::Data(format!(
                    "dates must be strictly ascending; row {} has {} after {}",
                    i + 1,
                    date,
                    self.dates[i - 1]
                )));
            }
            let ttm = &self.ttms[i];
            for j in 0..N_CONTRACTS {
                if !(self.prices[i][j] > 0.0) || !self.prices[i][j].is_finite() {
                    return Err(Error::Data(format!(
                        "row {} contract {}: price must be positive, got {}",
                        i + 1,
                        j + 1,
                        self.prices[i][j]
                    )));
                }
                if !(ttm[j] > 0.0) || !ttm[j].is_finite() {
                    return Err(Error::Data(format!(
                        "row {} contract {}: time-to-maturity must be positive, got {}",
                        i + 1,
                        j + 1,
                        ttm[j]
                    )));
                }
                if j > 0 && ttm[j] <= ttm[j - 1] {
                    return Err(Error::Data(format!(
                        "row {}: time-to-maturities must increase across contracts ({} !< {})",
                        i + 1,
                        ttm[j - 1],
                        ttm[j]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Reads the futures CSV schema
    /// `date,price_f1,ttm_f1,...,price_f6,ttm_f6`. Rows with missing or
    /// non-numeric cells are rejected, or silently dropped when
    /// `drop_bad_rows` is set.
    pub fn read_csv(path: &std::path::Path, drop_bad_rows: bool) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::Data(format!("cannot open {}: {}", path.display(), e)))?;

        let headers = reader
            .headers()
            .map_err(|e| Error::Data(format!("{}: bad header: {}", path.display(), e)))?
            .clone();
        let mut expected = vec!["date".to_string()];
        for j in 1..=N_CONTRACTS {
            expected.push(format!("price_f{}", j));
            expected.push(format!("ttm_f{}", j));
        }
        let got: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
        if got != expected {
            return Err(Error::Data(format!(
                "futures CSV header mismatch: expected {:?}, got {:?}",
                expected, got
            )));
        }

        let mut panel = FuturesPanel { dates: Vec::new(), prices: Vec::new(), ttms: Vec::new() };
        for (rec_idx, record) in reader.records().enumerate() {
            let row = rec_idx + 2; // 1-based, after the header
            let record =
                record.map_err(|e| Error::Data(format!("row {}: unreadable record: {}", row, e)))?;
            let mut ok = record.len() == 1 + 2 * N_CONTRACTS;
            let mut prices = [0.0; N_CONTRACTS];
            let mut ttms = [0.0; N_CONTRACTS];
            let mut bad_col = 0usize;
            if ok {
                for j in 0..N_CONTRACTS {
                    let pcol = 1 + 2 * j;
                    let tcol = 2 + 2 * j;
                    match (record[pcol].parse::<f64>(), record[tcol].parse::<f64>()) {
                        (Ok(p), Ok(t)) => {
                            prices[j] = p;
                            ttms[j] = t;
                        }
                        (Err(_), _) => {
                            ok = false;
                            bad_col = pcol + 1;
                            break;
                        }
                        (_, Err(_)) => {
                            ok = false;
                            bad_col = tcol + 1;
                            break;
                        }
                    }
                }
            }
            if !ok {
                if drop_bad_rows {
                    continue;
                }
                return Err(Error::Data(format!(
                    "row {} column {}: missing or non-numeric cell",
                    row, bad_col
                )));
            }
            panel.dates.push(record[0].to_string());
            panel.prices.push(prices);
            panel.ttms.push(ttms);
        }
        panel.validate()?;
        Ok(panel)
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        let mut header = vec!["date".to_string()];
        for j in 1..=N_CONTRACTS {
            header.push(format!("price_f{}", j));
            header.push(format!("ttm_f{}", j));
        }
        writeln!(f, "{}", header.join(","))?;
        for i in 0..self.len() {
            let mut row = vec![self.dates[i].clone()];
            for j in 0..N_CONTRACTS {
                row.push(format!("{}", self.prices[i][j]));
                row.push(format!("{}", self.ttms[i][j]));
            }
            writeln!(f, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Filtered state of the Kalman recursion.
#[derive(Debug, Clone, Copy)]
pub struct KalmanState {
    /// Filtered mean of (convenience yield, log price).
    pub mean: Vector2<f64>,
    /// Filtered covariance, kept symmetric PSD by re-symmetrizing after
    /// every update.
    pub cov: Matrix2<f64>,
}

struct Transition {
    intercept: Vector2<f64>,
    matrix: Matrix2<f64>,
    noise: Matrix2<f64>,
}

fn transition(theta: &TwoFactorTheta, r: f64, dt: f64) -> Transition {
    Transition {
        intercept: Vector2::new(
            theta.kappa_d * theta.mu_d * dt,
            (r - 0.5 * theta.sigma_p * theta.sigma_p) * dt,
        ),
        matrix: Matrix2::new(1.0 - theta.kappa_d * dt, 0.0, -dt, 1.0),
        // Euler covariance of the (yield, log price) increments.
        noise: Matrix2::new(
            theta.sigma_d * theta.sigma_d,
            theta.rho * theta.sigma_d * theta.sigma_p,
            theta.rho * theta.sigma_d * theta.sigma_p,
            theta.sigma_p * theta.sigma_p,
        ) * dt,
    }
}

fn measurement(
    theta: &TwoFactorTheta,
    r: f64,
    ttms: &[f64; N_CONTRACTS],
) -> (Vector6<f64>, SMatrix<f64, 6, 2>) {
    let mut intercept = Vector6::zeros();
    let mut loading = SMatrix::<f64, 6, 2>::zeros();
    for j in 0..N_CONTRACTS {
        intercept[j] = futures_log_intercept(
            ttms[j],
            theta.sigma_p,
            theta.sigma_d,
            theta.kappa_d,
            theta.mu_d,
            theta.rho,
            r,
        );
        loading[(j, 0)] = futures_delta_loading(ttms[j], theta.kappa_d);
        loading[(j, 1)] = 1.0;
    }
    (intercept, loading)
}

fn symmetrize(m: &mut Matrix2<f64>) {
    let off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    m[(0, 1)] = off;
    m[(1, 0)] = off;
}

/// One prediction/update step; returns the Gaussian log density of the
/// innovation, or `None` when the innovation covariance fails to factor.
fn filter_step(
    state: &mut KalmanState,
    trans: &Transition,
    intercept: &Vector6<f64>,
    loading: &SMatrix<f64, 6, 2>,
    meas_var: &Vector6<f64>,
    obs: &Vector6<f64>,
    predict: bool,
) -> Option<f64> {
    let (x_pred, p_pred) = if predict {
        (
            trans.intercept + trans.matrix * state.mean,
            trans.matrix * state.cov * trans.matrix.transpose() + trans.noise,
        )
    } else {
        (state.mean, state.cov)
    };

    let innovation = obs - intercept - loading * x_pred;
    let mut s: Matrix6<f64> = loading * p_pred * loading.transpose();
    for j in 0..N_CONTRACTS {
        s[(j, j)] += meas_var[j];
    }
    let chol = nalgebra::Cholesky::new(s)?;
    let log_det = 2.0 * (0..N_CONTRACTS).map(|j| chol.l()[(j, j)].ln()).sum::<f64>();
    let solved = chol.solve(&innovation);
    let quad = innovation.dot(&solved);
    if !quad.is_finite() {
        return None;
    }

    let gain = p_pred * loading.transpose() * chol.inverse();
    state.mean = x_pred + gain * innovation;
    let mut cov = p_pred - gain * loading * p_pred;
    symmetrize(&mut cov);
    state.cov = cov;

    Some(-0.5 * (N_CONTRACTS as f64 * LN_2PI + log_det + quad))
}

fn initial_state(log_first_price: f64) -> KalmanState {
    // Mildly diffuse prior centered on a zero yield and the first observed
    // log price; with long panels the choice washes out quickly.
    KalmanState { mean: Vector2::new(0.0, log_first_price), cov: Matrix2::identity() }
}

fn loglik_on_logs(
    log_prices: &[Vector6<f64>],
    ttms: &[[f64; N_CONTRACTS]],
    theta: &TwoFactorTheta,
    dt: f64,
    r: f64,
    intercept_shift: f64,
) -> f64 {
    loglik_with_prior(log_prices, ttms, theta, dt, r, intercept_shift, None)
}

fn loglik_with_prior(
    log_prices: &[Vector6<f64>],
    ttms: &[[f64; N_CONTRACTS]],
    theta: &TwoFactorTheta,
    dt: f64,
    r: f64,
    intercept_shift: f64,
    prior: Option<KalmanState>,
) -> f64 {
    if !theta.is_admissible() {
        return f64::NEG_INFINITY;
    }
    let trans = transition(theta, r, dt);
    let meas_var = Vector6::from_iterator(theta.meas_noise.iter().map(|d| d * d));
    let mut state = prior.unwrap_or_else(|| initial_state(log_prices[0][0]));
    let mut total = 0.0;
    for (i, obs) in log_prices.iter().enumerate() {
        let (mut intercept, loading) = measurement(theta, r, &ttms[i]);
        intercept.add_scalar_mut(intercept_shift);
        match filter_step(&mut state, &trans, &intercept, &loading, &meas_var, obs, i > 0) {
            Some(l) => total += l,
            None => return f64::NEG_INFINITY,
        }
    }
    total
}

/// Gaussian log-likelihood of the panel's log futures prices under the
/// state-space model. Inadmissible candidates and non-PSD innovation
/// covariances score negative infinity so optimizers can reject them.
pub fn kalman_loglik(panel: &FuturesPanel, theta: &TwoFactorTheta, dt: f64, r: f64) -> f64 {
    let logs: Vec<Vector6<f64>> = panel
        .prices
        .iter()
        .map(|p| Vector6::from_iterator(p.iter().map(|x| x.ln())))
        .collect();
    loglik_on_logs(&logs, &panel.ttms, theta, dt, r, 0.0)
}

/// Runs the filter over a panel and returns the final filtered state; used
/// to inspect covariance behavior.
pub fn filter_panel(panel: &FuturesPanel, theta: &TwoFactorTheta, dt: f64, r: f64) -> Result<KalmanState> {
    if !theta.is_admissible() {
        return Err(Error::InvalidParam("inadmissible two-factor parameters".into()));
    }
    let trans = transition(theta, r, dt);
    let meas_var = Vector6::from_iterator(theta.meas_noise.iter().map(|d| d * d));
    let mut state = initial_state(panel.prices[0][0].ln());
    for i in 0..panel.len() {
        let obs = Vector6::from_iterator(panel.prices[i].iter().map(|x| x.ln()));
        let (intercept, loading) = measurement(theta, r, &panel.ttms[i]);
        filter_step(&mut state, &trans, &intercept, &loading, &meas_var, &obs, i > 0)
            .ok_or_else(|| Error::Numerical("innovation covariance is not positive definite".into()))?;
    }
    Ok(state)
}

// --- maximum likelihood -----------------------------------------------------

/// Unconstrained reparameterization: log for positive parameters, atanh for
/// the correlation, identity for the long-run yield.
fn to_unconstrained(theta: &TwoFactorTheta) -> [f64; 11] {
    let v = theta.to_vec();
    let mut t = [0.0; 11];
    for (i, x) in v.iter().enumerate() {
        t[i] = match i {
            3 => *x,
            4 => x.atanh(),
            _ => x.ln(),
        };
    }
    t
}

fn from_unconstrained(t: &[f64]) -> TwoFactorTheta {
    let mut v = [0.0; 11];
    for (i, x) in t.iter().enumerate() {
        v[i] = match i {
            3 => *x,
            4 => x.tanh(),
            _ => x.exp(),
        };
    }
    TwoFactorTheta::from_vec(&v)
}

/// Jacobian diagonal d(natural)/d(unconstrained) at the estimate.
fn natural_jacobian(theta: &TwoFactorTheta) -> [f64; 11] {
    let v = theta.to_vec();
    let mut j = [0.0; 11];
    for i in 0..11 {
        j[i] = match i {
            3 => 1.0,
            4 => 1.0 - v[4] * v[4],
            _ => v[i],
        };
    }
    j
}

#[derive(Debug, Clone, Copy)]
pub struct MleConfig {
    /// Fixed risk-free rate entering transition and measurement equations.
    pub r: f64,
    /// Observation spacing in years (weekly data: 1/52).
    pub dt: f64,
    /// Optimizer iteration budget per start.
    pub max_iters: usize,
    /// Number of multi-start runs (first start is the supplied init).
    pub n_starts: usize,
    /// Standard deviation of start perturbations in unconstrained space.
    pub perturb_scale: f64,
    /// Seed for the start perturbations.
    pub seed: u64,
    /// Fix the long-run yield at this value instead of estimating it.
    pub fix_mu: Option<f64>,
}

impl Default for MleConfig {
    fn default() -> Self {
        MleConfig {
            r: 0.0231,
            dt: 1.0 / 52.0,
            max_iters: 8000,
            n_starts: 5,
            perturb_scale: 0.15,
            seed: 1,
            fix_mu: None,
        }
    }
}

/// Point estimates, standard errors and maximized log-likelihood.
#[derive(Debug, Clone, Copy)]
pub struct EstimationResult {
    pub estimates: TwoFactorTheta,
    /// Delta-method standard errors, same layout as the estimates.
    pub std_errors: TwoFactorTheta,
    pub log_likelihood: f64,
    pub evals: usize,
}

impl EstimationResult {
    /// `(name, estimate, standard error, ci_lo, ci_hi)` rows.
    pub fn rows(&self) -> Vec<(&'static str, f64, f64, f64, f64)> {
        let est = self.estimates.to_vec();
        let se = self.std_errors.to_vec();
        THETA_NAMES
            .iter()
            .enumerate()
            .map(|(i, name)| (*name, est[i], se[i], est[i] - 1.96 * se[i], est[i] + 1.96 * se[i]))
            .collect()
    }

    pub fn kappa_ci95(&self) -> (f64, f64) {
        let est = self.estimates.kappa_d;
        let se = self.std_errors.kappa_d;
        (est - 1.96 * se, est + 1.96 * se)
    }
}

/// Indices of the free coordinates in unconstrained space.
fn free_indices(fix_mu: bool) -> Vec<usize> {
    (0..11).filter(|i| !(fix_mu && *i == 3)).collect()
}

/// Maximizes the Kalman likelihood over the transformed parameter space
/// with multi-start Nelder-Mead, then computes standard errors from a
/// finite-difference Hessian of the negative log-likelihood.
pub fn estimate_two_factor(
    panel: &FuturesPanel,
    init: &TwoFactorTheta,
    cfg: &MleConfig,
) -> Result<EstimationResult> {
    panel.validate()?;
    if !init.is_admissible() {
        return Err(Error::InvalidParam("initial two-factor candidate violates parameter bounds".into()));
    }

    let logs: Vec<Vector6<f64>> = panel
        .prices
        .iter()
        .map(|p| Vector6::from_iterator(p.iter().map(|x| x.ln())))
        .collect();
    let ttms = panel.ttms.clone();

    let mut base = *init;
    if let Some(mu) = cfg.fix_mu {
        base.mu_d = mu;
    }
    let full0 = to_unconstrained(&base);
    let free = free_indices(cfg.fix_mu.is_some());
    let x0: Vec<f64> = free.iter().map(|&i| full0[i]).collect();

    let assemble = |x: &[f64]| -> TwoFactorTheta {
        let mut full = full0;
        for (k, &i) in free.iter().enumerate() {
            full[i] = x[k];
        }
        from_unconstrained(&full)
    };
    let objective = |x: &[f64]| -> f64 {
        let theta = assemble(x);
        -loglik_on_logs(&logs, &ttms, &theta, cfg.dt, cfg.r, 0.0)
    };

    // Multi-start: deterministic perturbations of the initial point.
    let starts: Vec<Vec<f64>> = (0..cfg.n_starts.max(1))
        .map(|k| {
            if k == 0 {
                x0.clone()
            } else {
                let mut rng = rng::stream(cfg.seed, domain::OPTIM_START, &[k as u64]);
                x0.iter()
                    .map(|v| v + cfg.perturb_scale * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            }
        })
        .collect();

    let opts = NelderMeadOptions {
        max_iters: cfg.max_iters,
        f_tol: 1e-9,
        x_tol: 1e-7,
        initial_step: 0.1,
    };
    let runs: Vec<OptimResult> = starts
        .par_iter()
        .map(|s| nelder_mead(objective, s, &opts))
        .collect();
    let best_idx = (0..runs.len())
        .min_by(|a, b| runs[*a].f.partial_cmp(&runs[*b].f).unwrap())
        .unwrap();

    // Polish the winner with a tight simplex.
    let polish_opts = NelderMeadOptions {
        max_iters: cfg.max_iters,
        f_tol: 1e-11,
        x_tol: 1e-9,
        initial_step: 0.01,
    };
    let polished = nelder_mead(objective, &runs[best_idx].x, &polish_opts);
    let evals = runs.iter().map(|r| r.evals).sum::<usize>() + polished.evals;
    if !polished.converged && !runs[best_idx].converged {
        return Err(Error::Numerical(format!(
            "likelihood maximization did not converge after {} evaluations; best -loglik {:.4} at {:?}",
            evals,
            polished.f,
            assemble(&polished.x)
        )));
    }
    let x_star = polished.x.clone();
    let neg_loglik = polished.f;

    // Finite-difference Hessian of the negative log-likelihood in the
    // unconstrained space.
    let n = x_star.len();
    let objective_mut = objective;
    let h: Vec<f64> = x_star.iter().map(|v| 1e-4 * v.abs().max(1.0)).collect();
    let f0 = neg_loglik;
    let mut hess = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let mut xp = x_star.clone();
        let mut xm = x_star.clone();
        xp[i] += h[i];
        xm[i] -= h[i];
        hess[(i, i)] = (objective_mut(&xp) - 2.0 * f0 + objective_mut(&xm)) / (h[i] * h[i]);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let mut xpp = x_star.clone();
            let mut xpm = x_star.clone();
            let mut xmp = x_star.clone();
            let mut xmm = x_star.clone();
            xpp[i] += h[i];
            xpp[j] += h[j];
            xpm[i] += h[i];
            xpm[j] -= h[j];
            xmp[i] -= h[i];
            xmp[j] += h[j];
            xmm[i] -= h[i];
            xmm[j] -= h[j];
            let v = (objective_mut(&xpp) - objective_mut(&xpm) - objective_mut(&xmp)
                + objective_mut(&xmm))
                / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }

    let cov = hess
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("observed information matrix is singular".into()))?;

    let estimates = assemble(&x_star);
    let jac = natural_jacobian(&estimates);
    let mut se_nat = [0.0; 11];
    for (k, &i) in free.iter().enumerate() {
        let var = cov[(k, k)];
        if var < 0.0 {
            return Err(Error::Numerical(format!(
                "negative variance for {} from the observed information matrix",
                THETA_NAMES[i]
            )));
        }
        se_nat[i] = var.sqrt() * jac[i].abs();
    }
    let std_errors = TwoFactorTheta::from_vec(&se_nat);

    Ok(EstimationResult {
        estimates,
        std_errors,
        log_likelihood: -neg_loglik,
        evals,
    })
}

/// Assembles the uncertainty box: the mean-reversion segment from the 95%
/// confidence interval of the estimate, the long-run-yield segment supplied
/// externally (the stability sweep is manual), and the intensity segment
/// from the intensity estimator's confidence interval.
pub fn build_uncertainty_box(
    result: &EstimationResult,
    mu_range: (f64, f64),
    lambda_ci: (f64, f64),
) -> Result<UncertaintyBox> {
    const FLOOR: f64 = 1e-6;
    let (k_lo, k_hi) = result.kappa_ci95();
    let b = UncertaintyBox {
        kappa_lo: k_lo.max(FLOOR),
        kappa_hi: k_hi.max(FLOOR),
        mu_lo: mu_range.0,
        mu_hi: mu_range.1,
        lambda_lo: lambda_ci.0.max(FLOOR),
        lambda_hi: lambda_ci.1.max(FLOOR),
    };
    b.validate()?;
    Ok(b)
}

// --- synthetic panels --------------------------------------------------------

/// Civil date from days since 1970-01-01 (Gregorian).
fn civil_from_days(z: i64) -> (i64, u32, u32) {
    let z = z + 719_468;
    let era = if z >= 0 { z } else { z - 146_096 } / 146_097;
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = (if mp < 10 { mp + 3 } else { mp - 9 }) as u32;
    (if m <= 2 { y + 1 } else { y }, m, d)
}

fn days_from_civil(y: i64, m: u32, d: u32) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = y - era * 400;
    let mp = if m > 2 { m - 3 } else { m + 9 } as i64;
    let doy = (153 * mp + 2) / 5 + d as i64 - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

/// Default per-date maturities: the six contract ladder with a saw-tooth
/// roll pattern, positive and increasing across contracts at every date.
pub fn default_ttms(n_dates: usize) -> Vec<[f64; N_CONTRACTS]> {
    let base = [0.042, 0.125, 0.209, 0.292, 0.376, 0.459];
    (0..n_dates)
        .map(|i| {
            let saw = ((i % 4) as f64 - 1.5) / 52.0;
            let mut row = [0.0; N_CONTRACTS];
            for j in 0..N_CONTRACTS {
                row[j] = base[j] + saw;
            }
            row
        })
        .collect()
}

/// Simulates a weekly futures panel exactly from the state-space model:
/// the transition equation drives the latent state and the measurement
/// equation produces noisy log futures prices.
pub fn simulate_panel(
    theta: &TwoFactorTheta,
    r: f64,
    dt: f64,
    n_dates: usize,
    initial: (f64, f64),
    seed: u64,
) -> FuturesPanel {
    let ttms = default_ttms(n_dates);
    let trans = transition(theta, r, dt);
    let noise_chol = nalgebra::Cholesky::new(trans.noise).expect("transition noise must be PD").l();

    let mut rng = rng::stream(seed, domain::SYNTHETIC, &[n_dates as u64]);
    let start = days_from_civil(1993, 9, 8);
    let mut state = Vector2::new(initial.0, initial.1);
    let mut panel = FuturesPanel { dates: Vec::new(), prices: Vec::new(), ttms: Vec::new() };

    for (i, ttm) in ttms.iter().enumerate() {
        if i > 0 {
            let z = Vector2::new(rng.sample::<f64, _>(StandardNormal), rng.sample(StandardNormal));
            state = trans.intercept + trans.matrix * state + noise_chol * z;
        }
        let (intercept, loading) = measurement(theta, r, ttm);
        let mut prices = [0.0; N_CONTRACTS];
        for j in 0..N_CONTRACTS {
            let log_f = intercept[j]
                + loading[(j, 0)] * state[0]
                + loading[(j, 1)] * state[1]
                + theta.meas_noise[j] * rng.sample::<f64, _>(StandardNormal);
            prices[j] = log_f.exp();
        }
        let (y, m, d) = civil_from_days(start + 7 * i as i64);
        panel.dates.push(format!("{:04}-{:02}-{:02}", y, m, d));
        panel.prices.push(prices);
        panel.ttms.push(*ttm);
    }
    panel
}

/// Table-2 style generating parameters for synthetic panels.
pub fn reference_theta() -> TwoFactorTheta {
    TwoFactorTheta {
        sigma_p: 0.3304,
        sigma_d: 0.4640,
        kappa_d: 0.9441,
        mu_d: 0.0,
        rho: 0.7061,
        meas_noise: [0.0364, 0.0150, 0.0238, 0.0137, 0.0224, 0.0083],
    }
}

/// PSD stress of the filter recursion over random admissible parameters and
/// random observations; returns the smallest eigenvalue seen.
pub fn covariance_psd_stress(n_draws: usize, n_steps: usize, seed: u64) -> f64 {
    (0..n_draws)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng::stream(seed, domain::SYNTHETIC, &[0xC0, k as u64]);
            let theta = TwoFactorTheta {
                sigma_p: rng.gen_range(0.05..1.5),
                sigma_d: rng.gen_range(0.05..1.5),
                kappa_d: rng.gen_range(0.05..3.0),
                mu_d: rng.gen_range(-0.5..0.5),
                rho: rng.gen_range(-0.95..0.95),
                meas_noise: [
                    rng.gen_range(0.001..0.2),
                    rng.gen_range(0.001..0.2),
                    rng.gen_range(0.001..0.2),
                    rng.gen_range(0.001..0.2),
                    rng.gen_range(0.001..0.2),
                    rng.gen_range(0.001..0.2),
                ],
            };
            let r = rng.gen_range(0.0..0.1);
            let dt = 1.0 / 52.0;
            let trans = transition(&theta, r, dt);
            let ttm = default_ttms(1)[0];
            let (intercept, loading) = measurement(&theta, r, &ttm);
            let meas_var = Vector6::from_iterator(theta.meas_noise.iter().map(|d| d * d));
            let mut state = initial_state(rng.gen_range(4.0..7.0));
            let mut min_eig = f64::INFINITY;
            for step in 0..n_steps {
                let obs = Vector6::from_iterator((0..6).map(|_| rng.gen_range(4.0..7.0)));
                if filter_step(&mut state, &trans, &intercept, &loading, &meas_var, &obs, step > 0)
                    .is_none()
                {
                    return f64::NEG_INFINITY;
                }
                // Symmetry is exact by construction; check eigenvalues.
                let eig = state.cov.symmetric_eigenvalues();
                min_eig = min_eig.min(eig[0].min(eig[1]));
            }
            min_eig
        })
        .reduce(|| f64::INFINITY, f64::min)
}
