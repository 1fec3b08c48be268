//! Domain types and closed-form building blocks: the two-factor price model
//! parameters, the biological growth curve, the harvesting payoff, the
//! catastrophe survival probability, the Girsanov density generators, and
//! the generator of the reflected BSDE together with its extremal (sup/inf)
//! versions over the parameter uncertainty box.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Estimated two-factor model parameters plus the risk-free rate and the
/// reference catastrophe intensity.
///
/// Units: volatilities in 1/sqrt(year), rates and mean-reversion speeds in
/// 1/year, intensity in events/year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Spot-price volatility.
    pub sigma_p: f64,
    /// Convenience-yield volatility.
    pub sigma_d: f64,
    /// Convenience-yield mean-reversion speed.
    pub kappa_d: f64,
    /// Risk-neutral long-run convenience yield.
    pub mu_d: f64,
    /// Instantaneous correlation of the two Brownian drivers.
    pub rho: f64,
    /// Risk-free rate.
    pub r: f64,
    /// Reference catastrophe intensity.
    pub lambda_q: f64,
}

impl ModelParams {
    /// Point estimates used throughout the experiments.
    pub fn reference() -> Self {
        ModelParams {
            sigma_p: 0.3304,
            sigma_d: 0.4640,
            kappa_d: 0.9441,
            mu_d: 0.0,
            rho: 0.7061,
            r: 0.0231,
            lambda_q: 0.2392,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_p > 0.0) || !self.sigma_p.is_finite() {
            return Err(Error::InvalidParam(format!("sigma_p must be > 0, got {}", self.sigma_p)));
        }
        if !(self.sigma_d > 0.0) || !self.sigma_d.is_finite() {
            return Err(Error::InvalidParam(format!("sigma_d must be > 0, got {}", self.sigma_d)));
        }
        if !(self.kappa_d > 0.0) || !self.kappa_d.is_finite() {
            return Err(Error::InvalidParam(format!("kappa_d must be > 0, got {}", self.kappa_d)));
        }
        if !(self.lambda_q > 0.0) || !self.lambda_q.is_finite() {
            return Err(Error::InvalidParam(format!("lambda_q must be > 0, got {}", self.lambda_q)));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::InvalidParam(format!("rho must lie strictly inside (-1, 1), got {}", self.rho)));
        }
        if !self.mu_d.is_finite() || !self.r.is_finite() {
            return Err(Error::InvalidParam("mu_d and r must be finite".into()));
        }
        Ok(())
    }
}

/// State vector: net convenience yield and spot price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVec {
    /// Net convenience yield (1/year).
    pub delta: f64,
    /// Spot price ($/1000 board feet), strictly positive.
    pub price: f64,
}

impl StateVec {
    pub fn new(delta: f64, price: f64) -> Self {
        StateVec { delta, price }
    }

    /// Builds a state from the log-price representation; exact inverse of
    /// [`StateVec::log_price`] up to floating-point round-trip of exp/ln.
    pub fn from_log_price(delta: f64, log_price: f64) -> Self {
        StateVec { delta, price: log_price.exp() }
    }

    pub fn log_price(&self) -> f64 {
        self.price.ln()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.price > 0.0) || !self.price.is_finite() {
            return Err(Error::InvalidParam(format!("price must be > 0, got {}", self.price)));
        }
        if !self.delta.is_finite() {
            return Err(Error::InvalidParam("delta must be finite".into()));
        }
        Ok(())
    }
}

/// Hypercube of admissible uncertain parameters
/// (kappa, mu, lambda) = (mean-reversion, long-run yield, intensity).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyBox {
    pub kappa_lo: f64,
    pub kappa_hi: f64,
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
}

impl UncertaintyBox {
    /// The 95%-confidence hypercube used in the experiments.
    pub fn reference() -> Self {
        UncertaintyBox {
            kappa_lo: 0.8183,
            kappa_hi: 1.0699,
            mu_lo: -0.1020,
            mu_hi: 0.0090,
            lambda_lo: 0.1255,
            lambda_hi: 0.3528,
        }
    }

    /// A zero-volume box pinned at a single control point.
    pub fn degenerate(point: ControlPoint) -> Self {
        UncertaintyBox {
            kappa_lo: point.kappa_u,
            kappa_hi: point.kappa_u,
            mu_lo: point.mu_u,
            mu_hi: point.mu_u,
            lambda_lo: point.lambda_u,
            lambda_hi: point.lambda_u,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_lo <= self.kappa_hi && self.mu_lo <= self.mu_hi && self.lambda_lo <= self.lambda_hi) {
            return Err(Error::InvalidParam("uncertainty box requires lo <= hi in every dimension".into()));
        }
        if !(self.kappa_lo > 0.0) {
            return Err(Error::InvalidParam(format!("kappa_lo must be > 0, got {}", self.kappa_lo)));
        }
        if !(self.lambda_lo > 0.0) {
            return Err(Error::InvalidParam(format!("lambda_lo must be > 0, got {}", self.lambda_lo)));
        }
        Ok(())
    }

    pub fn is_degenerate(&self) -> bool {
        self.kappa_lo == self.kappa_hi && self.mu_lo == self.mu_hi && self.lambda_lo == self.lambda_hi
    }

    pub fn contains(&self, p: &ControlPoint) -> bool {
        p.kappa_u >= self.kappa_lo
            && p.kappa_u <= self.kappa_hi
            && p.mu_u >= self.mu_lo
            && p.mu_u <= self.mu_hi
            && p.lambda_u >= self.lambda_lo
            && p.lambda_u <= self.lambda_hi
    }

    /// The eight corner control points.
    pub fn corners(&self) -> [ControlPoint; 8] {
        let mut out = [ControlPoint { kappa_u: 0.0, mu_u: 0.0, lambda_u: 0.0 }; 8];
        let ks = [self.kappa_lo, self.kappa_hi];
        let ms = [self.mu_lo, self.mu_hi];
        let ls = [self.lambda_lo, self.lambda_hi];
        let mut n = 0;
        for &k in &ks {
            for &m in &ms {
                for &l in &ls {
                    out[n] = ControlPoint { kappa_u: k, mu_u: m, lambda_u: l };
                    n += 1;
                }
            }
        }
        out
    }
}

/// One admissible value of the uncertain parameter triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlPoint {
    pub kappa_u: f64,
    pub mu_u: f64,
    pub lambda_u: f64,
}

impl ControlPoint {
    /// The reference point recovering the market measure.
    pub fn reference(params: &ModelParams) -> Self {
        ControlPoint {
            kappa_u: params.kappa_d,
            mu_u: params.mu_d,
            lambda_u: params.lambda_q,
        }
    }
}

/// Harvesting economics: fixed cost, amenity flow, grace age before which
/// the stand has no merchantable volume and cannot burn, and the unit
/// conversion applied to the growth curve before multiplying by price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EconomicParams {
    /// Fixed harvesting cost ($).
    pub harvest_cost: f64,
    /// Amenity flow ($/hectare/year).
    pub amenity: f64,
    /// Age before which growth is zero and the hazard is inactive (years).
    pub grace_age: f64,
    /// Conversion applied to the growth volume before multiplying by price.
    pub volume_factor: f64,
}

impl EconomicParams {
    /// Base-case economics of the experiments.
    pub fn reference() -> Self {
        EconomicParams {
            harvest_cost: 127.74,
            amenity: 8.0,
            grace_age: 50.0,
            volume_factor: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.harvest_cost >= 0.0) {
            return Err(Error::InvalidParam(format!("harvest_cost must be >= 0, got {}", self.harvest_cost)));
        }
        if !(self.grace_age >= 0.0) {
            return Err(Error::InvalidParam(format!("grace_age must be >= 0, got {}", self.grace_age)));
        }
        if !(self.volume_factor > 0.0) {
            return Err(Error::InvalidParam(format!("volume_factor must be > 0, got {}", self.volume_factor)));
        }
        if !self.amenity.is_finite() {
            return Err(Error::InvalidParam("amenity must be finite".into()));
        }
        Ok(())
    }
}

/// Logistic merchantable-volume curve `G(t) = scale - coefficient * t^exponent`,
/// zero before the lower knot and constant after the upper knot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthCurve {
    pub scale: f64,
    pub coefficient: f64,
    pub exponent: f64,
    pub lower_knot: f64,
    pub upper_knot: f64,
}

impl Default for GrowthCurve {
    fn default() -> Self {
        GrowthCurve {
            scale: 792.0,
            coefficient: 5313.0,
            exponent: -0.5,
            lower_knot: 50.0,
            upper_knot: 103.0,
        }
    }
}

impl GrowthCurve {
    pub fn validate(&self) -> Result<()> {
        if !(self.lower_knot <= self.upper_knot) {
            return Err(Error::InvalidParam("growth knots must satisfy lower <= upper".into()));
        }
        Ok(())
    }

    /// Wood volume (m^3/hectare) at the given stand age.
    ///
    /// Zero before the lower knot, `scale - coefficient * t^exponent` on the
    /// knot interval, constant beyond the upper knot.
    pub fn volume(&self, age: f64) -> f64 {
        if age < self.lower_knot {
            return 0.0;
        }
        let t = age.clamp(self.lower_knot, self.upper_knot);
        self.scale - self.coefficient * t.powf(self.exponent)
    }
}

/// Instant harvesting revenue: `price * volume_factor * G(t) - harvest_cost`.
pub fn payoff(t: f64, state: &StateVec, econ: &EconomicParams, growth: &GrowthCurve) -> f64 {
    state.price * econ.volume_factor * growth.volume(t) - econ.harvest_cost
}

/// Conditional survival probability of the catastrophe time over `[s, t]`,
/// with the hazard inactive before `grace_age`:
/// `exp(-lambda * (max(t - grace_age, 0) - max(s - grace_age, 0)))`.
pub fn survival(s: f64, t: f64, lambda: f64, grace_age: f64) -> Result<f64> {
    if s > t {
        return Err(Error::InvalidParam(format!("survival requires s <= t, got s={} t={}", s, t)));
    }
    let exposed = (t - grace_age).max(0.0) - (s - grace_age).max(0.0);
    Ok((-lambda * exposed).exp())
}

/// Girsanov density generator pair for a control point `u`:
///
/// `a1 = (kappa_u*mu_u - kappa*mu - (kappa_u - kappa)*delta) / sigma_d`,
/// `a2 = -rho * a1 / sqrt(1 - rho^2)`.
///
/// Vanishes identically at the reference control point.
pub fn alpha(u: &ControlPoint, delta: f64, params: &ModelParams) -> (f64, f64) {
    let a1 = (u.kappa_u * u.mu_u - params.kappa_d * params.mu_d - (u.kappa_u - params.kappa_d) * delta)
        / params.sigma_d;
    let a2 = -params.rho * a1 / (1.0 - params.rho * params.rho).sqrt();
    (a1, a2)
}

/// RBSDE generator under the subjective measure indexed by `u`:
///
/// `f = A - (r + lambda_u * 1{t >= grace_age}) * y + a1*z1 + a2*z2`.
///
/// The hazard term is gated by the grace age so the generator is consistent
/// with a catastrophe that cannot strike a pre-merchantable stand.
pub fn driver_f(
    t: f64,
    state: &StateVec,
    y: f64,
    z: (f64, f64),
    u: &ControlPoint,
    econ: &EconomicParams,
    params: &ModelParams,
) -> f64 {
    let (a1, a2) = alpha(u, state.delta, params);
    let hazard = if t >= econ.grace_age { u.lambda_u } else { 0.0 };
    econ.amenity - (params.r + hazard) * y + a1 * z.0 + a2 * z.1
}

/// Whether the extremal driver takes the supremum (optimistic) or the
/// infimum (conservative) over the uncertainty box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriverMode {
    Sup,
    Inf,
}

/// Exact extremum of [`driver_f`] over the box, attained at one of the eight
/// corners: the generator is affine in `lambda_u` and bilinear in
/// `(kappa_u, mu_u)` for fixed state, so rectangle extrema sit at corners.
pub fn driver_extremal(
    mode: DriverMode,
    t: f64,
    state: &StateVec,
    y: f64,
    z: (f64, f64),
    bounds: &UncertaintyBox,
    econ: &EconomicParams,
    params: &ModelParams,
) -> f64 {
    let mut best = f64::NAN;
    for corner in bounds.corners() {
        let v = driver_f(t, state, y, z, &corner, econ, params);
        if best.is_nan()
            || (mode == DriverMode::Sup && v > best)
            || (mode == DriverMode::Inf && v < best)
        {
            best = v;
        }
    }
    best
}
