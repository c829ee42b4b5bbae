//! Problem data: market coefficients, insurance loadings, and the claim model.
//!
//! Every time-dependent coefficient is a [`CoefficientSchedule`], either a
//! constant or a right-continuous step function. Integrals of schedules, and
//! of exponentials of those integrals, are evaluated in closed form by
//! splitting at breakpoints, so no quadrature error enters the closed-form
//! formulas.

use std::fmt;

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_adaptive;

/// Deterministic bounded coefficient on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientSchedule {
    Constant(f64),
    /// `values[i]` applies on `[breakpoints[i], breakpoints[i + 1])`; the last
    /// value extends to infinity. `breakpoints[0]` is always `0.0`.
    Piecewise {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
}

impl CoefficientSchedule {
    pub fn constant(value: f64) -> Self {
        CoefficientSchedule::Constant(value)
    }

    pub fn piecewise(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != values.len() {
            return Err(Error::ConfigFormat(
                "piecewise schedule needs matching, nonempty breakpoints and values".into(),
            ));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::ConfigFormat(
                "piecewise schedule must start at t = 0".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::ConfigFormat(
                "piecewise breakpoints must be strictly increasing".into(),
            ));
        }
        if breakpoints.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::ConfigFormat(
                "piecewise schedule entries must be finite".into(),
            ));
        }
        if values.len() == 1 {
            return Ok(CoefficientSchedule::Constant(values[0]));
        }
        Ok(CoefficientSchedule::Piecewise { breakpoints, values })
    }

    pub fn at(&self, t: f64) -> f64 {
        match self {
            CoefficientSchedule::Constant(v) => *v,
            CoefficientSchedule::Piecewise { breakpoints, values } => {
                let idx = breakpoints.partition_point(|&b| b <= t);
                values[idx.saturating_sub(1)]
            }
        }
    }

    /// Interior breakpoints (excluding `t = 0`).
    pub fn breakpoints(&self) -> &[f64] {
        match self {
            CoefficientSchedule::Constant(_) => &[],
            CoefficientSchedule::Piecewise { breakpoints, .. } => &breakpoints[1..],
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, CoefficientSchedule::Constant(_))
    }

    /// Exact integral over `[a, b]`, `a <= b`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match self {
            CoefficientSchedule::Constant(v) => v * (b - a),
            CoefficientSchedule::Piecewise { .. } => {
                let mut total = 0.0;
                for_each_piece(a, b, self.breakpoints(), |lo, hi| {
                    total += self.at(lo) * (hi - lo);
                });
                total
            }
        }
    }

    /// `\int_a^b exp(\int_v^b c(w) dw) dv`: the value at `b` of a unit flow
    /// paid continuously over `[a, b]` and compounded at this rate.
    pub fn compounded_annuity(&self, a: f64, b: f64) -> f64 {
        let mut pieces = Vec::new();
        for_each_piece(a, b, self.breakpoints(), |lo, hi| pieces.push((lo, hi)));
        let mut growth_to_end = 1.0;
        let mut total = 0.0;
        for &(lo, hi) in pieces.iter().rev() {
            let c = self.at(lo);
            let len = hi - lo;
            total += growth_to_end * annuity_factor(c, len);
            growth_to_end *= (c * len).exp();
        }
        total
    }
}

/// `\int_0^len exp(c s) ds`, stable for small `c`.
pub(crate) fn annuity_factor(c: f64, len: f64) -> f64 {
    if c == 0.0 {
        len
    } else {
        (c * len).exp_m1() / c
    }
}

/// Calls `f(lo, hi)` for consecutive pieces of `[a, b]` split at `breaks`.
pub(crate) fn for_each_piece(a: f64, b: f64, breaks: &[f64], mut f: impl FnMut(f64, f64)) {
    if b <= a {
        return;
    }
    let mut lo = a;
    for &bp in breaks {
        if bp <= lo {
            continue;
        }
        if bp >= b {
            break;
        }
        f(lo, bp);
        lo = bp;
    }
    f(lo, b);
}

/// Stock coefficients. Absent when the model has no risky investment.
#[derive(Debug, Clone, PartialEq)]
pub struct StockParams {
    pub mu: CoefficientSchedule,
    pub sigma: CoefficientSchedule,
    /// Non-degeneracy bound: `sigma(t) > sigma_floor > 0`.
    pub sigma_floor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketParams {
    pub r: CoefficientSchedule,
    pub stock: Option<StockParams>,
}

impl MarketParams {
    /// Market price of risk squared, `(mu - r)^2 / sigma^2`, at `t`.
    pub fn sharpe_sq(&self, t: f64) -> f64 {
        match &self.stock {
            Some(s) => {
                let excess = s.mu.at(t) - self.r.at(t);
                let sig = s.sigma.at(t);
                excess * excess / (sig * sig)
            }
            None => 0.0,
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.r.breakpoints().to_vec();
        if let Some(s) = &self.stock {
            all.extend_from_slice(s.mu.breakpoints());
            all.extend_from_slice(s.sigma.breakpoints());
        }
        all.sort_by(f64::total_cmp);
        all.dedup();
        all
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClaimSizeLaw {
    Exponential { rate: f64 },
    FiniteDiscrete { atoms: Vec<f64>, weights: Vec<f64> },
}

impl ClaimSizeLaw {
    /// `E[f(Z)]` under the size law.
    pub fn expectation<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        match self {
            ClaimSizeLaw::Exponential { rate } => {
                // Substitute w = exp(-rate z) to map [0, inf) onto (0, 1].
                let rate = *rate;
                gauss_legendre_adaptive(|w: f64| f(-w.ln() / rate), 0.0, 1.0, 1e-12)
                    .unwrap_or(f64::NAN)
            }
            ClaimSizeLaw::FiniteDiscrete { atoms, weights } => {
                atoms.iter().zip(weights).map(|(&z, &w)| w * f(z)).sum()
            }
        }
    }

    pub fn first_two_moments(&self) -> (f64, f64) {
        match self {
            ClaimSizeLaw::Exponential { rate } => (1.0 / rate, 2.0 / (rate * rate)),
            ClaimSizeLaw::FiniteDiscrete { atoms, weights } => {
                let m1 = atoms.iter().zip(weights).map(|(z, w)| w * z).sum();
                let m2 = atoms.iter().zip(weights).map(|(z, w)| w * z * z).sum();
                (m1, m2)
            }
        }
    }
}

/// Compound-Poisson claims with Levy measure `v(dz) = intensity * F(dz)`.
/// An intensity of zero models a company without insurance business.
#[derive(Debug, Clone, PartialEq)]
pub struct ClaimModel {
    pub intensity: f64,
    pub size_law: ClaimSizeLaw,
}

impl ClaimModel {
    pub fn exponential(intensity: f64, rate: f64) -> Self {
        ClaimModel {
            intensity,
            size_law: ClaimSizeLaw::Exponential { rate },
        }
    }

    pub fn discrete(intensity: f64, atoms: Vec<f64>, weights: Vec<f64>) -> Self {
        ClaimModel {
            intensity,
            size_law: ClaimSizeLaw::FiniteDiscrete { atoms, weights },
        }
    }

    pub fn none() -> Self {
        ClaimModel::exponential(0.0, 1.0)
    }

    pub fn is_active(&self) -> bool {
        self.intensity > 0.0
    }

    /// `\int z v(dz)`.
    pub fn mu0(&self) -> f64 {
        claim_moments(self).0
    }

    /// `\int z^2 v(dz)`.
    pub fn sigma0_sq(&self) -> f64 {
        claim_moments(self).1
    }

    /// `\int f(z) v(dz)`.
    pub fn levy_integral<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        if !self.is_active() {
            return 0.0;
        }
        self.intensity * self.size_law.expectation(f)
    }
}

/// First and second moment rates of the claim process, `(mu0, sigma0^2)`.
pub fn claim_moments(claims: &ClaimModel) -> (f64, f64) {
    if !claims.is_active() {
        return (0.0, 0.0);
    }
    let (m1, m2) = claims.size_law.first_two_moments();
    (claims.intensity * m1, claims.intensity * m2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InsuranceParams {
    /// Insurer safety loading.
    pub kappa: f64,
    /// Reinsurer safety loading.
    pub kappa_r: f64,
}

/// A full problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Investment horizon `T` in years.
    pub horizon: f64,
    pub x0: f64,
    /// Risk aversion. `f64::INFINITY` is accepted by the closed forms and
    /// yields the riskless limit.
    pub theta: f64,
    pub market: MarketParams,
    pub insurance: InsuranceParams,
    pub claims: ClaimModel,
}

impl ModelConfig {
    /// Three-year reference instance with exponential claims:
    /// `mu = 0.15, r = 0.08, sigma = 0.2, x0 = 1, lambda = 5, delta = 10,
    /// kappa = 0.1, kappa_r = 0.15, theta = 2`.
    pub fn baseline() -> Self {
        ModelConfig {
            horizon: 3.0,
            x0: 1.0,
            theta: 2.0,
            market: MarketParams {
                r: CoefficientSchedule::constant(0.08),
                stock: Some(StockParams {
                    mu: CoefficientSchedule::constant(0.15),
                    sigma: CoefficientSchedule::constant(0.2),
                    sigma_floor: DEFAULT_SIGMA_FLOOR,
                }),
            },
            insurance: InsuranceParams {
                kappa: 0.1,
                kappa_r: 0.15,
            },
            claims: ClaimModel::exponential(5.0, 10.0),
        }
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        ModelConfig {
            theta,
            ..self.clone()
        }
    }

    /// `mu0 * (kappa - kappa_r)`: the premium drift left after full cession.
    pub fn loading_drift(&self) -> f64 {
        self.claims.mu0() * (self.insurance.kappa - self.insurance.kappa_r)
    }

    /// `mu0^2 kappa_r^2 / sigma0^2`, zero without insurance business.
    pub fn insurance_premium_sq(&self) -> f64 {
        let (mu0, s2) = claim_moments(&self.claims);
        if s2 > 0.0 {
            let k = self.insurance.kappa_r;
            mu0 * mu0 * k * k / s2
        } else {
            0.0
        }
    }

    /// Breakpoints of every market schedule, merged.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.market.breakpoints()
    }

    /// `\int_a^b r`.
    pub fn rate_integral(&self, a: f64, b: f64) -> f64 {
        self.market.r.integral(a, b)
    }

    /// `\int_a^b rho`, exact on piecewise-constant schedules.
    pub fn rho_integral(&self, a: f64, b: f64) -> f64 {
        let mut total = 0.0;
        for_each_piece(a, b, &self.breakpoints(), |lo, hi| {
            total += rho(self, lo) * (hi - lo);
        });
        total
    }

    /// `\int_a^b exp(\int_v^b r) dv`.
    pub fn compounded_annuity(&self, a: f64, b: f64) -> f64 {
        self.market.r.compounded_annuity(a, b)
    }
}

pub const DEFAULT_SIGMA_FLOOR: f64 = 1e-6;

/// Benefit rate the insurer can extract from bearing risk:
/// `mu0^2 kappa_r^2 / sigma0^2 + (mu(t) - r(t))^2 / sigma(t)^2`.
pub fn rho(cfg: &ModelConfig, t: f64) -> f64 {
    cfg.insurance_premium_sq() + cfg.market.sharpe_sq(t)
}

/// A violated standing assumption.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

const DENSE_SAMPLES: usize = 1000;

fn sample_times(cfg: &ModelConfig) -> Vec<f64> {
    let t_end = cfg.horizon;
    let mut ts: Vec<f64> = (0..=DENSE_SAMPLES)
        .map(|i| t_end * i as f64 / DENSE_SAMPLES as f64)
        .collect();
    ts.extend(cfg.breakpoints().into_iter().filter(|&b| b <= t_end));
    ts
}

/// Returns every violated invariant; an empty list means the config is valid.
pub fn validate_config(cfg: &ModelConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |field: &'static str, message: String| out.push(Violation { field, message });

    if !(cfg.horizon > 0.0 && cfg.horizon.is_finite()) {
        push("horizon", format!("horizon must be positive and finite, got {}", cfg.horizon));
    }
    if !cfg.x0.is_finite() {
        push("x0", "initial wealth must be finite".into());
    }
    if cfg.theta.is_nan() || cfg.theta < 0.0 {
        push("theta", format!("theta must be >= 0, got {}", cfg.theta));
    }

    let times = if cfg.horizon > 0.0 && cfg.horizon.is_finite() {
        sample_times(cfg)
    } else {
        vec![0.0]
    };
    let m = &cfg.market;
    if times.iter().any(|&t| !m.r.at(t).is_finite()) {
        push("r", "r(t) must be finite".into());
    }
    match &m.stock {
        Some(stock) => {
            if times.iter().any(|&t| !(m.r.at(t) > 0.0)) {
                push("r", "r(t) > 0 fails".into());
            }
            if times
                .iter()
                .any(|&t| !(stock.mu.at(t).is_finite() && stock.mu.at(t) > m.r.at(t)))
            {
                push("mu", "mu(t) > r(t) fails".into());
            }
            if !(stock.sigma_floor > 0.0) {
                push("sigma_floor", "sigma_floor > 0 fails".into());
            }
            if times
                .iter()
                .any(|&t| !(stock.sigma.at(t).is_finite() && stock.sigma.at(t) > stock.sigma_floor))
            {
                push("sigma", "sigma(t) > sigma_floor fails".into());
            }
        }
        None => {
            if times.iter().any(|&t| m.r.at(t) < 0.0) {
                push("r", "r(t) >= 0 fails".into());
            }
        }
    }

    let ins = cfg.insurance;
    if !(ins.kappa > 0.0) {
        push("kappa", "kappa > 0 fails".into());
    }
    if !(ins.kappa_r > 0.0) {
        push("kappa_r", "kappa_r > 0 fails".into());
    }
    if !(ins.kappa <= ins.kappa_r) {
        push("kappa", "kappa ≤ kappa_r fails".into());
    }

    let claims = &cfg.claims;
    if !(claims.intensity >= 0.0 && claims.intensity.is_finite()) {
        push("lambda", "claim intensity must be finite and >= 0".into());
    } else if claims.is_active() {
        match &claims.size_law {
            ClaimSizeLaw::Exponential { rate } => {
                if !(*rate > 0.0 && rate.is_finite()) {
                    push("claim_rate", "exponential rate must be positive".into());
                }
            }
            ClaimSizeLaw::FiniteDiscrete { atoms, weights } => {
                if atoms.is_empty() || atoms.len() != weights.len() {
                    push("claim_atoms", "atoms and weights must be nonempty with equal length".into());
                }
                if weights.iter().any(|&w| !(w >= 0.0)) {
                    push("claim_weights", "weights must be nonnegative".into());
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    push("claim_weights", format!("weights sum to {total}, not 1"));
                }
                if atoms.iter().any(|&z| !(z > 0.0 && z.is_finite())) {
                    push("claim_atoms", "atoms must be strictly positive and finite".into());
                }
            }
        }
        let (mu0, s2) = claim_moments(claims);
        if !(mu0 > 0.0 && mu0.is_finite() && s2 > 0.0 && s2.is_finite()) {
            push("lambda", "claim moments mu0 and sigma0^2 must be positive and finite".into());
        }
    }
    out
}
