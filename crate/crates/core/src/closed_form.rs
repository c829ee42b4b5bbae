//! Explicit value function, saddle-point controls, optimal strategies and
//! efficient frontier.
//!
//! The candidate value function is `phi(t, x, y) = L(t) x y + P(t) y^2 + S(t) y`
//! with `L = exp(\int_t^T r)`, `P = exp(\int_t^T rho) / (2 theta)` and
//! `S = mu0 (kappa - kappa_r) \int_t^T exp(\int_s^T r) ds`. Every exponential
//! of an integral is formed by integrating once and exponentiating.

use crate::error::{Error, Result};
use crate::params::{claim_moments, ModelConfig};

/// Coefficients of the bilinear-quadratic value function at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeCoefficients {
    /// Coefficient of `x y`: the riskless compounding factor to `T`.
    pub growth: f64,
    /// Coefficient of `y^2`: the measure-distortion penalty weight.
    pub penalty: f64,
    /// Coefficient of `y`: accumulated net premium drift.
    pub loading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InsurerControls {
    /// Amount held in the stock.
    pub pi: f64,
    /// Retention level.
    pub u: f64,
}

/// Saddle point of the pointwise game at `(t, x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleControls {
    pub pi: f64,
    pub u: f64,
    /// Diffusion measure-change control.
    pub p: f64,
    /// Jump measure-change control is `q(z) = q_slope * z`.
    pub q_slope: f64,
}

impl SaddleControls {
    pub fn q(&self, z: f64) -> f64 {
        self.q_slope * z
    }

    pub fn insurer(&self) -> InsurerControls {
        InsurerControls { pi: self.pi, u: self.u }
    }
}

/// Initial condition `(s, X(s), Y(s))` of a game started at time `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StartState {
    pub s: f64,
    pub x: f64,
    pub y: f64,
}

impl StartState {
    pub fn origin(cfg: &ModelConfig) -> Self {
        StartState { s: 0.0, x: cfg.x0, y: 1.0 }
    }
}

/// A point on the mean-variance plane of terminal wealth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierPoint {
    pub theta: f64,
    pub mean: f64,
    pub variance: f64,
}

pub(crate) fn require_theta(theta: f64) -> Result<()> {
    if theta > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "risk aversion must be positive for strategy formulas, got {theta}"
        )))
    }
}

fn check_time(cfg: &ModelConfig, t: f64) -> Result<()> {
    if (0.0..=cfg.horizon).contains(&t) {
        Ok(())
    } else {
        Err(Error::Domain(format!("t = {t} outside [0, {}]", cfg.horizon)))
    }
}

/// `(mu(t) - r(t)) / sigma(t)^2`, zero without a stock.
pub fn investment_scale(cfg: &ModelConfig, t: f64) -> f64 {
    match &cfg.market.stock {
        Some(s) => {
            let sig = s.sigma.at(t);
            (s.mu.at(t) - cfg.market.r.at(t)) / (sig * sig)
        }
        None => 0.0,
    }
}

/// `mu0 kappa_r / sigma0^2`, zero without insurance business.
pub fn retention_scale(cfg: &ModelConfig) -> f64 {
    let (mu0, s2) = claim_moments(&cfg.claims);
    if s2 > 0.0 {
        mu0 * cfg.insurance.kappa_r / s2
    } else {
        0.0
    }
}

/// `-(mu(t) - r(t)) / sigma(t)`, zero without a stock.
pub fn market_price_of_risk(cfg: &ModelConfig, t: f64) -> f64 {
    match &cfg.market.stock {
        Some(s) => -(s.mu.at(t) - cfg.market.r.at(t)) / s.sigma.at(t),
        None => 0.0,
    }
}

pub fn ode_coefficients(cfg: &ModelConfig, t: f64) -> Result<OdeCoefficients> {
    require_theta(cfg.theta)?;
    check_time(cfg, t)?;
    let t_end = cfg.horizon;
    Ok(OdeCoefficients {
        growth: cfg.rate_integral(t, t_end).exp(),
        penalty: cfg.rho_integral(t, t_end).exp() / (2.0 * cfg.theta),
        loading: cfg.loading_drift() * cfg.compounded_annuity(t, t_end),
    })
}

/// `phi(t, x, y)`, the value of the auxiliary game started at `(t, x, y)`.
pub fn value_function(cfg: &ModelConfig, t: f64, x: f64, y: f64) -> Result<f64> {
    if !(y >= 0.0) {
        return Err(Error::Domain(format!("density state must be >= 0, got {y}")));
    }
    let c = ode_coefficients(cfg, t)?;
    Ok(c.growth * x * y + c.penalty * y * y + c.loading * y)
}

/// Optimal monotone mean-variance value from `(0, x0, 1)`.
pub fn mmv_value(cfg: &ModelConfig) -> Result<f64> {
    Ok(value_function(cfg, 0.0, cfg.x0, 1.0)? - 0.5 / cfg.theta)
}

/// Value in the risk-neutral mode `theta = 0`: the zero-strategy mean.
pub fn mean_only_value(cfg: &ModelConfig) -> f64 {
    riskless_wealth(cfg, cfg.horizon)
}

/// `exp(\int_t^T (rho - r))`, the growth of the benchmark gap.
fn gap_growth(cfg: &ModelConfig, t: f64) -> f64 {
    let t_end = cfg.horizon;
    (cfg.rho_integral(t, t_end) - cfg.rate_integral(t, t_end)).exp()
}

pub fn saddle_feedback(cfg: &ModelConfig, t: f64, _x: f64, y: f64) -> Result<SaddleControls> {
    require_theta(cfg.theta)?;
    check_time(cfg, t)?;
    if !(y >= 0.0) {
        return Err(Error::Domain(format!("density state must be >= 0, got {y}")));
    }
    let gap = gap_growth(cfg, t) * y / cfg.theta;
    let q_slope = retention_scale(cfg);
    Ok(SaddleControls {
        pi: investment_scale(cfg, t) * gap,
        u: q_slope * gap,
        p: market_price_of_risk(cfg, t),
        q_slope,
    })
}

/// Benchmark wealth at `t` for a game started at `start`:
/// compounded start wealth, plus accumulated net premium, plus the
/// anticipated extra return. The optimal strategies scale the gap between
/// this benchmark and the current wealth.
pub fn benchmark_wealth(cfg: &ModelConfig, t: f64, start: StartState) -> Result<f64> {
    require_theta(cfg.theta)?;
    if !(start.s <= t && t <= cfg.horizon && start.s >= 0.0) {
        return Err(Error::Domain(format!(
            "need 0 <= s <= t <= T, got s = {}, t = {t}",
            start.s
        )));
    }
    let t_end = cfg.horizon;
    Ok(start.x * cfg.rate_integral(start.s, t).exp()
        + cfg.loading_drift() * cfg.compounded_annuity(start.s, t)
        + start.y / cfg.theta
            * (cfg.rho_integral(start.s, t_end) - cfg.rate_integral(t, t_end)).exp())
}

/// Optimal `(pi*, u*)` written against the wealth benchmark. Not clamped.
pub fn optimal_strategy_benchmark(
    cfg: &ModelConfig,
    t: f64,
    current_x: f64,
    start: StartState,
) -> Result<InsurerControls> {
    let gap = benchmark_wealth(cfg, t, start)? - current_x;
    Ok(InsurerControls {
        pi: investment_scale(cfg, t) * gap,
        u: retention_scale(cfg) * gap,
    })
}

/// Wealth at `t` under the zero strategy.
pub fn riskless_wealth(cfg: &ModelConfig, t: f64) -> f64 {
    cfg.x0 * cfg.rate_integral(0.0, t).exp() + cfg.loading_drift() * cfg.compounded_annuity(0.0, t)
}

/// `E^P X(t)` under the equilibrium strategy from `(0, x0, 1)`.
pub fn expected_wealth_optimal(cfg: &ModelConfig, t: f64) -> Result<f64> {
    require_theta(cfg.theta)?;
    check_time(cfg, t)?;
    let t_end = cfg.horizon;
    let extra = (cfg.rho_integral(0.0, t_end).exp() - cfg.rho_integral(t, t_end).exp())
        * (-cfg.rate_integral(t, t_end)).exp()
        / cfg.theta;
    Ok(riskless_wealth(cfg, t) + extra)
}

/// `E^P Y(t)^2` under the equilibrium measure change.
pub fn y_second_moment(cfg: &ModelConfig, t: f64) -> f64 {
    cfg.rho_integral(0.0, t).exp()
}

pub fn frontier_from_theta(cfg: &ModelConfig) -> Result<FrontierPoint> {
    let mean = expected_wealth_optimal(cfg, cfg.horizon)?;
    let riskless = riskless_wealth(cfg, cfg.horizon);
    let total_rho = cfg.rho_integral(0.0, cfg.horizon);
    let variance = if total_rho > 0.0 {
        let decay = (-total_rho).exp();
        decay / -(-total_rho).exp_m1() * (mean - riskless).powi(2)
    } else {
        0.0
    };
    Ok(FrontierPoint {
        theta: cfg.theta,
        mean,
        variance,
    })
}

/// Risk aversion whose optimal strategy attains terminal mean `target`.
pub fn theta_for_target_mean(cfg: &ModelConfig, target: f64) -> Result<f64> {
    let riskless = riskless_wealth(cfg, cfg.horizon);
    if !(target > riskless) {
        return Err(Error::ZeroStrategyRegime { target, riskless });
    }
    let excess = cfg.rho_integral(0.0, cfg.horizon).exp_m1();
    if !(excess > 0.0) {
        return Err(Error::Domain(
            "no risk premium available: only the riskless wealth is attainable".into(),
        ));
    }
    Ok(excess / (target - riskless))
}

/// Frontier point for a target mean, including the degenerate zero-strategy
/// point `(variance 0, riskless)` when the target is not above riskless
/// wealth. The degenerate point reports `theta = inf`.
pub fn frontier_for_target_mean(cfg: &ModelConfig, target: f64) -> Result<FrontierPoint> {
    match theta_for_target_mean(cfg, target) {
        Ok(theta) => frontier_from_theta(&cfg.with_theta(theta)),
        Err(Error::ZeroStrategyRegime { riskless, .. }) => Ok(FrontierPoint {
            theta: f64::INFINITY,
            mean: riskless,
            variance: 0.0,
        }),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{ClaimModel, CoefficientSchedule, MarketParams, StockParams};
    use crate::quadrature::integrate_with_breaks;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    // 30-digit evaluations of the scalar closed forms for the baseline config.
    const GROWTH_0: f64 = 1.271_249_150_321_404_7;
    const PENALTY_0: f64 = 0.427_395_971_764_238_07;
    const LOADING_0: f64 = -0.084_765_359_475_438_966;
    const PHI_0: f64 = 1.613_879_762_610_203_8;
    const MMV: f64 = 1.363_879_762_610_203_8;
    const RISKLESS_T: f64 = 1.186_483_790_845_965_7;
    const MEAN_T: f64 = 1.541_275_734_374_441_9;
    const VAR_T: f64 = 0.177_395_971_764_238_07;
    const EY2_T: f64 = 1.709_583_887_056_952_3;

    #[test]
    fn terminal_coefficients() {
        let cfg = ModelConfig::baseline();
        let c = ode_coefficients(&cfg, 3.0).unwrap();
        assert_eq!(c, OdeCoefficients { growth: 1.0, penalty: 0.25, loading: 0.0 });
    }

    #[test]
    fn coefficients_at_origin() {
        let c = ode_coefficients(&ModelConfig::baseline(), 0.0).unwrap();
        assert_relative_eq!(c.growth, GROWTH_0, max_relative = 1e-14);
        assert_relative_eq!(c.penalty, PENALTY_0, max_relative = 1e-14);
        assert_relative_eq!(c.loading, LOADING_0, max_relative = 1e-13);
    }

    #[test]
    fn equal_loadings_remove_drift_term() {
        let mut cfg = ModelConfig::baseline();
        cfg.insurance.kappa = cfg.insurance.kappa_r;
        for t in [0.0, 1.2, 3.0] {
            assert_eq!(ode_coefficients(&cfg, t).unwrap().loading, 0.0);
        }
        assert_relative_eq!(
            riskless_wealth(&cfg, 2.0),
            cfg.x0 * (0.16f64).exp(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn nonpositive_theta_is_a_domain_error() {
        let cfg = ModelConfig::baseline().with_theta(0.0);
        assert!(matches!(ode_coefficients(&cfg, 0.0), Err(Error::Domain(_))));
        assert!(matches!(mmv_value(&cfg), Err(Error::Domain(_))));
        assert!(matches!(saddle_feedback(&cfg, 0.0, 1.0, 1.0), Err(Error::Domain(_))));
        assert_relative_eq!(mean_only_value(&cfg), RISKLESS_T, max_relative = 1e-14);
    }

    #[test]
    fn value_function_examples() {
        let cfg = ModelConfig::baseline();
        assert_relative_eq!(
            value_function(&cfg, 3.0, 1.7, 0.4).unwrap(),
            1.7 * 0.4 + 0.16 / 4.0,
            max_relative = 1e-15
        );
        assert_eq!(value_function(&cfg, 1.0, 5.0, 0.0).unwrap(), 0.0);
        assert_relative_eq!(value_function(&cfg, 0.0, 1.0, 1.0).unwrap(), PHI_0, max_relative = 1e-14);
        assert_relative_eq!(mmv_value(&cfg).unwrap(), MMV, max_relative = 1e-14);
    }

    #[test]
    fn riskless_only_market_compounds() {
        // mu = r makes the market premium vanish; no claims.
        let mut cfg = ModelConfig::baseline();
        cfg.market.stock.as_mut().unwrap().mu = CoefficientSchedule::constant(0.08);
        cfg.claims = ClaimModel::none();
        assert_relative_eq!(mmv_value(&cfg).unwrap(), (0.24f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn infinite_theta_is_riskless() {
        let cfg = ModelConfig::baseline().with_theta(f64::INFINITY);
        assert_relative_eq!(mmv_value(&cfg).unwrap(), RISKLESS_T, max_relative = 1e-14);
        assert_relative_eq!(
            expected_wealth_optimal(&cfg, 3.0).unwrap(),
            RISKLESS_T,
            max_relative = 1e-14
        );
        let big = ModelConfig::baseline().with_theta(1e9);
        assert_abs_diff_eq!(mmv_value(&big).unwrap(), RISKLESS_T, epsilon = 1e-9);
    }

    #[test]
    fn saddle_examples() {
        let cfg = ModelConfig::baseline();
        let s = saddle_feedback(&cfg, 0.0, 1.0, 1.0).unwrap();
        // 0.875 * exp(0.29625) and 0.375 * exp(0.29625)
        assert_relative_eq!(s.pi, 1.176_705_526_840_772_8, max_relative = 1e-14);
        assert_relative_eq!(s.u, 0.504_302_368_646_045_5, max_relative = 1e-14);
        assert_relative_eq!(s.p, -0.35, max_relative = 1e-14);
        assert_relative_eq!(s.q(0.2), 0.75 * 0.2, max_relative = 1e-14);
        let zero = saddle_feedback(&cfg, 1.0, 1.0, 0.0).unwrap();
        assert_eq!((zero.pi, zero.u), (0.0, 0.0));
        assert_eq!(zero.p, s.p);
        for t in [0.5, 2.0, 3.0] {
            assert_relative_eq!(saddle_feedback(&cfg, t, 3.0, 2.0).unwrap().p, -0.35, max_relative = 1e-14);
        }
    }

    #[test]
    fn benchmark_examples() {
        let cfg = ModelConfig::baseline();
        let start = StartState::origin(&cfg);
        let a = optimal_strategy_benchmark(&cfg, 0.0, 1.0, start).unwrap();
        let bracket = 0.672_403_158_194_727_3;
        assert_relative_eq!(a.pi, 1.75 * bracket, max_relative = 1e-14);
        assert_relative_eq!(a.u, 0.75 * bracket, max_relative = 1e-14);
        let t = 1.7;
        let b = benchmark_wealth(&cfg, t, start).unwrap();
        let zero = optimal_strategy_benchmark(&cfg, t, b, start).unwrap();
        assert_abs_diff_eq!(zero.pi, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(zero.u, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn riskless_and_moments_examples() {
        let cfg = ModelConfig::baseline();
        assert_eq!(riskless_wealth(&cfg, 0.0), cfg.x0);
        assert_relative_eq!(riskless_wealth(&cfg, 3.0), RISKLESS_T, max_relative = 1e-14);
        assert_relative_eq!(expected_wealth_optimal(&cfg, 0.0).unwrap(), cfg.x0, max_relative = 1e-15);
        assert_relative_eq!(expected_wealth_optimal(&cfg, 3.0).unwrap(), MEAN_T, max_relative = 1e-14);
        assert_eq!(y_second_moment(&cfg, 0.0), 1.0);
        assert_relative_eq!(y_second_moment(&cfg, 3.0), EY2_T, max_relative = 1e-14);
        let mut flat = cfg.clone();
        flat.insurance.kappa_r = 0.0;
        flat.insurance.kappa = 0.0;
        flat.market.stock.as_mut().unwrap().mu = CoefficientSchedule::constant(0.08);
        assert_eq!(y_second_moment(&flat, 2.0), 1.0);
    }

    #[test]
    fn frontier_example() {
        let cfg = ModelConfig::baseline();
        let f = frontier_from_theta(&cfg).unwrap();
        assert_eq!(f.theta, 2.0);
        assert_relative_eq!(f.mean, MEAN_T, max_relative = 1e-14);
        assert_relative_eq!(f.variance, VAR_T, max_relative = 1e-13);
        let inf = frontier_from_theta(&cfg.with_theta(f64::INFINITY)).unwrap();
        assert_eq!(inf.variance, 0.0);
    }

    #[test]
    fn no_investment_frontier() {
        let cfg = ModelConfig {
            market: MarketParams { r: CoefficientSchedule::constant(0.0), stock: None },
            ..ModelConfig::baseline()
        };
        let riskless = riskless_wealth(&cfg, cfg.horizon);
        assert_relative_eq!(riskless, 1.0 + 0.5 * (0.1 - 0.15) * 3.0, max_relative = 1e-15);
        let f = frontier_from_theta(&cfg).unwrap();
        let r = 0.05625 * 3.0;
        assert_relative_eq!(f.variance, (f.mean - riskless).powi(2) / (r as f64).exp_m1(), max_relative = 1e-13);
        let s = saddle_feedback(&cfg, 0.0, 1.0, 1.0).unwrap();
        assert_eq!((s.pi, s.p), (0.0, 0.0));
    }

    #[test]
    fn target_mean_inversion() {
        let cfg = ModelConfig::baseline();
        let excess = cfg.rho_integral(0.0, 3.0).exp_m1();
        assert_relative_eq!(theta_for_target_mean(&cfg, RISKLESS_T + excess).unwrap(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(theta_for_target_mean(&cfg, MEAN_T).unwrap(), 2.0, max_relative = 1e-12);
        assert!(matches!(
            theta_for_target_mean(&cfg, RISKLESS_T - 0.1),
            Err(Error::ZeroStrategyRegime { .. })
        ));
        let p = frontier_for_target_mean(&cfg, RISKLESS_T).unwrap();
        assert_eq!(p.variance, 0.0);
        assert_relative_eq!(p.mean, RISKLESS_T, max_relative = 1e-15);
    }

    /// Quadrature oracle for the coefficients, independent of the exact
    /// piecewise integrals.
    fn quadrature_coefficients(cfg: &ModelConfig, t: f64) -> (f64, f64, f64) {
        let t_end = cfg.horizon;
        let bps = cfg.breakpoints();
        let tol = 1e-13;
        let r_int = |a: f64| integrate_with_breaks(|s| cfg.market.r.at(s), a, t_end, tol, &bps).unwrap();
        let rho_int = integrate_with_breaks(|s| crate::params::rho(cfg, s), t, t_end, tol, &bps).unwrap();
        let ann = integrate_with_breaks(|s| r_int(s).exp(), t, t_end, tol, &bps).unwrap();
        (r_int(t).exp(), rho_int.exp() / (2.0 * cfg.theta), cfg.loading_drift() * ann)
    }

    fn schedule(lo: f64, hi: f64) -> impl Strategy<Value = CoefficientSchedule> {
        prop_oneof![
            (lo..hi).prop_map(CoefficientSchedule::Constant),
            (prop::collection::vec(lo..hi, 2..4), 0.3f64..1.2).prop_map(|(vals, step)| {
                let bps = (0..vals.len()).map(|i| i as f64 * step).collect();
                CoefficientSchedule::piecewise(bps, vals).unwrap()
            }),
        ]
    }

    prop_compose! {
        fn configs()(
            horizon in 0.5f64..4.0,
            x0 in 0.1f64..5.0,
            theta in 0.2f64..10.0,
            r in schedule(0.01, 0.08),
            premium in 0.01f64..0.15,
            sigma in schedule(0.1, 0.4),
            kappa_r in 0.05f64..0.4,
            kappa_frac in 0.1f64..1.0,
            lambda in 0.5f64..8.0,
            rate in 2.0f64..20.0,
        ) -> ModelConfig {
            let mu = match &r {
                CoefficientSchedule::Constant(v) => CoefficientSchedule::Constant(v + premium),
                CoefficientSchedule::Piecewise { breakpoints, values } => CoefficientSchedule::piecewise(
                    breakpoints.clone(), values.iter().map(|v| v + premium).collect()).unwrap(),
            };
            let mut cfg = ModelConfig::baseline();
            cfg.horizon = horizon;
            cfg.x0 = x0;
            cfg.theta = theta;
            cfg.market = MarketParams {
                r,
                stock: Some(StockParams { mu, sigma, sigma_floor: 1e-6 }),
            };
            cfg.insurance.kappa_r = kappa_r;
            cfg.insurance.kappa = kappa_r * kappa_frac;
            cfg.claims = ClaimModel::exponential(lambda, rate);
            cfg
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn configs_are_valid(cfg in configs()) {
            prop_assert!(crate::params::validate_config(&cfg).is_empty());
        }

        #[test]
        fn coefficients_match_quadrature(cfg in configs(), frac in 0.0f64..1.0) {
            let t = frac * cfg.horizon;
            let c = ode_coefficients(&cfg, t).unwrap();
            let (g, p, l) = quadrature_coefficients(&cfg, t);
            prop_assert!((c.growth - g).abs() <= 1e-10 * g);
            prop_assert!((c.penalty - p).abs() <= 1e-10 * p);
            prop_assert!((c.loading - l).abs() <= 1e-10 * (1.0 + l.abs()));
        }

        #[test]
        fn duality_identity(cfg in configs()) {
            let lhs = mmv_value(&cfg).unwrap();
            let rhs = riskless_wealth(&cfg, cfg.horizon)
                + cfg.rho_integral(0.0, cfg.horizon).exp_m1() / (2.0 * cfg.theta);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }

        #[test]
        fn mv_equals_mmv_on_frontier(cfg in configs()) {
            let f = frontier_from_theta(&cfg).unwrap();
            let mmv = mmv_value(&cfg).unwrap();
            prop_assert!((mmv - (f.mean - 0.5 * cfg.theta * f.variance)).abs() <= 1e-12 * (1.0 + mmv.abs()));
        }

        #[test]
        fn linear_frontier_law(cfg in configs()) {
            let f = frontier_from_theta(&cfg).unwrap();
            let gap = f.mean - riskless_wealth(&cfg, cfg.horizon);
            prop_assert!((f.variance * cfg.theta - gap).abs() <= 1e-12 * (1.0 + gap.abs()));
        }

        #[test]
        fn benchmark_matches_feedback_at_start(cfg in configs(), frac in 0.0f64..1.0, x in -2.0f64..5.0, y in 0.01f64..3.0) {
            let s = frac * cfg.horizon;
            let fb = saddle_feedback(&cfg, s, x, y).unwrap();
            let bm = optimal_strategy_benchmark(&cfg, s, x, StartState { s, x, y }).unwrap();
            prop_assert!((fb.pi - bm.pi).abs() <= 1e-12 * (1.0 + fb.pi.abs()));
            prop_assert!((fb.u - bm.u).abs() <= 1e-12 * (1.0 + fb.u.abs()));
        }

        #[test]
        fn value_decreases_in_theta(cfg in configs(), factor in 1.01f64..5.0) {
            let a = mmv_value(&cfg).unwrap();
            let b = mmv_value(&cfg.with_theta(cfg.theta * factor)).unwrap();
            prop_assert!(b < a);
        }

        #[test]
        fn target_mean_round_trip(cfg in configs()) {
            let f = frontier_from_theta(&cfg).unwrap();
            let theta = theta_for_target_mean(&cfg, f.mean).unwrap();
            let back = frontier_from_theta(&cfg.with_theta(theta)).unwrap();
            prop_assert!((back.mean - f.mean).abs() <= 1e-9);
        }
    }

    #[test]
    fn ode_residuals_by_finite_differences() {
        let cfg = ModelConfig::baseline();
        let r = 0.08;
        let rho = 0.17875;
        let drift = cfg.loading_drift();
        let mut prev = f64::INFINITY;
        for h in [1e-2, 5e-3, 2.5e-3] {
            let t = 1.3;
            let up = ode_coefficients(&cfg, t + h).unwrap();
            let dn = ode_coefficients(&cfg, t - h).unwrap();
            let mid = ode_coefficients(&cfg, t).unwrap();
            let d = |a: f64, b: f64| (a - b) / (2.0 * h);
            let res = [
                d(up.growth, dn.growth) + r * mid.growth,
                d(up.penalty, dn.penalty) + rho * mid.penalty,
                d(up.loading, dn.loading) + drift * mid.growth,
            ];
            let worst = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(worst < 1e-4 * h * h / 1e-4 + 1e-12, "h = {h}: residual {worst}");
            assert!(worst < prev / 3.0 || prev.is_infinite());
            prev = worst;
        }
    }
}
