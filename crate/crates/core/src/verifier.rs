//! Checks of the saddle point: the generator of `(X, Y)` applied to the
//! candidate value function `phi = L x y + P y^2 + S y`, a grid scan of the
//! one-sided inequalities, and a paired Monte Carlo comparison of deviations.
//!
//! For this candidate the jump part of the generator reduces to
//! `\int (-L u z y q(z) + P y^2 q(z)^2) v(dz)`. With the market at its saddle
//! control the generator does not depend on the insurer's controls at all,
//! so insurer deviations against a fixed market give exactly zero; they are
//! strictly negative against the market's best response.

use std::fmt;
use std::io::Write;

use crate::closed_form::{ode_coefficients, saddle_feedback, SaddleControls};
use crate::error::{Error, Result};
use crate::export::csv_writer;
use crate::params::{rho, ModelConfig};
use crate::sde::{
    moments, objective_samples, simulate_terminals, Deviated, EquilibriumStrategy, McEstimate,
    McSettings, Side, StrategyEdit,
};

/// The market's jump control `z -> q(z)`.
pub enum JumpControl {
    /// `q(z) = intercept + slope z`.
    Affine { intercept: f64, slope: f64 },
    General(Box<dyn Fn(f64) -> f64 + Sync>),
}

impl JumpControl {
    pub fn linear(slope: f64) -> Self {
        JumpControl::Affine { intercept: 0.0, slope }
    }

    pub fn eval(&self, z: f64) -> f64 {
        match self {
            JumpControl::Affine { intercept, slope } => intercept + slope * z,
            JumpControl::General(f) => f(z),
        }
    }
}

impl fmt::Debug for JumpControl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JumpControl::Affine { intercept, slope } => {
                write!(f, "Affine {{ intercept: {intercept}, slope: {slope} }}")
            }
            JumpControl::General(_) => f.write_str("General(..)"),
        }
    }
}

#[derive(Debug)]
pub struct GeneratorInput {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub pi: f64,
    pub u: f64,
    pub p: f64,
    pub q: JumpControl,
}

impl GeneratorInput {
    pub fn at_saddle(t: f64, x: f64, y: f64, s: &SaddleControls) -> Self {
        GeneratorInput {
            t,
            x,
            y,
            pi: s.pi,
            u: s.u,
            p: s.p,
            q: JumpControl::linear(s.q_slope),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegralRoute {
    /// Closed form from `(lambda, mu0, sigma0^2)`; affine `q` only.
    Exact,
    /// Adaptive quadrature of the literal jump integrand.
    Quadrature,
}

/// `L^{a,b} phi (t, x, y)`, integrating the jumps in closed form when `q` is
/// affine and by quadrature otherwise.
pub fn apply_generator(cfg: &ModelConfig, input: &GeneratorInput) -> Result<f64> {
    let route = match input.q {
        JumpControl::Affine { .. } => IntegralRoute::Exact,
        JumpControl::General(_) => IntegralRoute::Quadrature,
    };
    apply_generator_with(cfg, input, route)
}

pub fn apply_generator_with(cfg: &ModelConfig, input: &GeneratorInput, route: IntegralRoute) -> Result<f64> {
    let GeneratorInput { t, x, y, pi, u, p, ref q } = *input;
    if !(0.0..cfg.horizon).contains(&t) {
        return Err(Error::Domain(format!("t = {t} outside [0, {})", cfg.horizon)));
    }
    if !(y > 0.0) {
        return Err(Error::Domain(format!("generator needs y > 0, got {y}")));
    }
    if !(u >= 0.0) {
        return Err(Error::Domain(format!("retention must be >= 0, got {u}")));
    }
    let c = ode_coefficients(cfg, t)?;
    let (lam, pen, load) = (c.growth, c.penalty, c.loading);
    let r = cfg.market.r.at(t);
    let (excess, sigma) = match &cfg.market.stock {
        Some(s) => (s.mu.at(t) - r, s.sigma.at(t)),
        None => (0.0, 0.0),
    };
    let mu0 = cfg.claims.mu0();
    let kappa_r = cfg.insurance.kappa_r;
    let loading_drift = cfg.loading_drift();

    let phi_t = -r * lam * x * y - rho(cfg, t) * pen * y * y - loading_drift * lam * y;
    let phi_x = lam * y;
    let phi_y = lam * x + 2.0 * pen * y + load;
    let drift = r * x + pi * excess + mu0 * kappa_r * u + loading_drift;
    let diffusion = y * y * p * p * pen + y * pi * sigma * p * lam;

    let jumps = if !cfg.claims.is_active() {
        0.0
    } else {
        match route {
            IntegralRoute::Exact => {
                let JumpControl::Affine { intercept: a, slope: b } = *q else {
                    return Err(Error::Misuse("exact jump integral needs an affine q".into()));
                };
                let (lambda, s2) = (cfg.claims.intensity, cfg.claims.sigma0_sq());
                -lam * u * y * (a * mu0 + b * s2)
                    + pen * y * y * (a * a * lambda + 2.0 * a * b * mu0 + b * b * s2)
            }
            IntegralRoute::Quadrature => {
                let phi = |x: f64, y: f64| lam * x * y + pen * y * y + load * y;
                let base = phi(x, y);
                cfg.claims.levy_integral(|z| {
                    let qz = q.eval(z);
                    phi(x - u * z, y + y * qz) - base + u * z * phi_x - y * qz * phi_y
                })
            }
        }
    };
    Ok(phi_t + drift * phi_x + diffusion + jumps)
}

/// The market's pointwise best response `(p, q slope)` to insurer controls:
/// the minimizer of the generator, `p = -pi sigma L / (2 y P)` and
/// `q(z) = L u z / (2 y P)`.
pub fn market_best_response(cfg: &ModelConfig, t: f64, y: f64, pi: f64, u: f64) -> Result<(f64, f64)> {
    let c = ode_coefficients(cfg, t)?;
    let sigma = cfg.market.stock.as_ref().map_or(0.0, |s| s.sigma.at(t));
    let denom = 2.0 * y * c.penalty;
    Ok((-pi * sigma * c.growth / denom, c.growth * u / denom))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanControl {
    Saddle,
    Pi,
    U,
    P,
    Q,
    /// Insurer `pi` deviation met by the market's best response.
    PiBestResponse,
    /// Insurer `u` deviation met by the market's best response.
    UBestResponse,
}

impl ScanControl {
    pub fn side(&self) -> Side {
        match self {
            ScanControl::Saddle => Side::Neither,
            ScanControl::Pi | ScanControl::U | ScanControl::PiBestResponse | ScanControl::UBestResponse => {
                Side::Insurer
            }
            ScanControl::P | ScanControl::Q => Side::Market,
        }
    }
}

impl fmt::Display for ScanControl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScanControl::Saddle => "saddle",
            ScanControl::Pi => "pi",
            ScanControl::U => "u",
            ScanControl::P => "p",
            ScanControl::Q => "q",
            ScanControl::PiBestResponse => "pi_vs_best_response",
            ScanControl::UBestResponse => "u_vs_best_response",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub control: ScanControl,
    pub delta: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanGrid {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub deltas: Vec<f64>,
}

impl ScanGrid {
    /// `t in {0, 1, 2, 2.9}`, `x, y in {0.5, 1, 2}`,
    /// `delta in {+-0.5, +-0.1, +-0.01}`.
    pub fn standard() -> Self {
        ScanGrid {
            t: vec![0.0, 1.0, 2.0, 2.9],
            x: vec![0.5, 1.0, 2.0],
            y: vec![0.5, 1.0, 2.0],
            deltas: vec![-0.5, -0.1, -0.01, 0.01, 0.1, 0.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleReport {
    pub rows: Vec<ScanRow>,
    pub max_abs_residual_at_saddle: f64,
    /// Largest generator value over insurer deviations (should be `<= tol`).
    pub max_over_insurer_deviations: f64,
    /// Smallest generator value over market deviations (should be `>= -tol`).
    pub min_over_market_deviations: f64,
    pub deviation_sets: String,
}

pub const SCAN_TOLERANCE: f64 = 1e-8;

impl SaddleReport {
    pub fn saddle_ok(&self, tol: f64) -> bool {
        self.max_abs_residual_at_saddle <= tol
    }

    pub fn insurer_ok(&self, tol: f64) -> bool {
        self.max_over_insurer_deviations <= tol
    }

    pub fn market_ok(&self, tol: f64) -> bool {
        self.min_over_market_deviations >= -tol
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.saddle_ok(tol) && self.insurer_ok(tol) && self.market_ok(tol)
    }

    /// The row furthest on the wrong side of its condition.
    pub fn worst_offender(&self) -> Option<&ScanRow> {
        let excess = |r: &ScanRow| match r.control.side() {
            Side::Neither => r.value.abs(),
            Side::Insurer => r.value,
            Side::Market => -r.value,
        };
        self.rows.iter().max_by(|a, b| excess(a).total_cmp(&excess(b)))
    }

    /// CSV `t,x,y,control,delta,generator_value`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv_writer(out);
        w.write_record(["t", "x", "y", "control", "delta", "generator_value"])?;
        for r in &self.rows {
            w.write_record([
                r.t.to_string(),
                r.x.to_string(),
                r.y.to_string(),
                r.control.to_string(),
                r.delta.to_string(),
                format!("{:e}", r.value),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Scans the grid around the closed-form saddle controls.
pub fn hjbi_scan(cfg: &ModelConfig, grid: &ScanGrid) -> Result<SaddleReport> {
    hjbi_scan_candidate(cfg, grid, |t, x, y| saddle_feedback(cfg, t, x, y))
}

/// Scans the grid around arbitrary candidate controls, e.g. deliberately
/// miscomputed ones.
pub fn hjbi_scan_candidate(
    cfg: &ModelConfig,
    grid: &ScanGrid,
    candidate: impl Fn(f64, f64, f64) -> Result<SaddleControls>,
) -> Result<SaddleReport> {
    if grid.t.is_empty() || grid.x.is_empty() || grid.y.is_empty() {
        return Err(Error::Domain("scan grids must be nonempty".into()));
    }
    if grid.y.iter().any(|&y| !(y > 0.0)) {
        return Err(Error::Domain("scan grid for y must be positive".into()));
    }
    let mut rows = Vec::new();
    for &t in &grid.t {
        for &x in &grid.x {
            for &y in &grid.y {
                let s = candidate(t, x, y)?;
                let eval = |pi: f64, u: f64, p: f64, q_slope: f64| {
                    apply_generator(
                        cfg,
                        &GeneratorInput { t, x, y, pi, u, p, q: JumpControl::linear(q_slope) },
                    )
                };
                let mut push = |control, delta, value| rows.push(ScanRow { t, x, y, control, delta, value });
                push(ScanControl::Saddle, 0.0, eval(s.pi, s.u, s.p, s.q_slope)?);
                for &d in &grid.deltas {
                    push(ScanControl::Pi, d, eval(s.pi + d, s.u, s.p, s.q_slope)?);
                    if s.u + d >= 0.0 {
                        push(ScanControl::U, d, eval(s.pi, s.u + d, s.p, s.q_slope)?);
                    }
                    push(ScanControl::P, d, eval(s.pi, s.u, s.p + d, s.q_slope)?);
                    push(ScanControl::Q, d, eval(s.pi, s.u, s.p, s.q_slope + d)?);
                    let (bp, bq) = market_best_response(cfg, t, y, s.pi + d, s.u)?;
                    push(ScanControl::PiBestResponse, d, eval(s.pi + d, s.u, bp, bq)?);
                    if s.u + d >= 0.0 {
                        let (bp, bq) = market_best_response(cfg, t, y, s.pi, s.u + d)?;
                        push(ScanControl::UBestResponse, d, eval(s.pi, s.u + d, bp, bq)?);
                    }
                }
            }
        }
    }
    let fold = |side: Side, init: f64, f: fn(f64, f64) -> f64| {
        rows.iter()
            .filter(|r| r.control.side() == side)
            .fold(init, |m, r| f(m, r.value))
    };
    let max_abs_residual_at_saddle = rows
        .iter()
        .filter(|r| r.control == ScanControl::Saddle)
        .fold(0.0f64, |m, r| m.max(r.value.abs()));
    Ok(SaddleReport {
        max_over_insurer_deviations: fold(Side::Insurer, f64::NEG_INFINITY, f64::max),
        min_over_market_deviations: fold(Side::Market, f64::INFINITY, f64::min),
        max_abs_residual_at_saddle,
        deviation_sets: format!(
            "additive on pi, u (u >= 0 only), p; additive on the slope of q(z); insurer deviations also against the market best response; deltas {:?}",
            grid.deltas
        ),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleCheckRow {
    pub edit: StrategyEdit,
    pub side: Side,
    /// Paired estimate of `J(deviation) - J(equilibrium)`.
    pub delta_j: McEstimate,
    pub consistent: bool,
}

/// Paired Monte Carlo comparison of one-sided deviations from the
/// equilibrium. Every deviation reuses the equilibrium paths' noise.
/// Insurer deviations must not raise `J` by more than 3 standard errors,
/// market deviations must not lower it by more than 3.
pub fn mc_saddle_check(cfg: &ModelConfig, deviations: &[StrategyEdit], settings: &McSettings) -> Result<Vec<SaddleCheckRow>> {
    let eq = EquilibriumStrategy::new(cfg)?;
    for edit in deviations {
        edit.validate()?;
        if let StrategyEdit::ShiftQSlope(d) = *edit {
            if eq.q_slope() + d < 0.0 {
                return Err(Error::Domain(format!(
                    "deviation {edit} makes 1 + q(z) negative for large claims"
                )));
            }
        }
    }
    let base = objective_samples(cfg, &simulate_terminals(cfg, &eq, settings)?);
    let mut out = Vec::with_capacity(deviations.len());
    for &edit in deviations {
        let dev = Deviated::new(&eq, edit)?;
        let samples = objective_samples(cfg, &simulate_terminals(cfg, &dev, settings)?);
        let diffs: Vec<f64> = samples.iter().zip(&base).map(|(a, b)| a - b).collect();
        let m = moments(&diffs);
        let delta_j = McEstimate {
            mean: m.mean,
            std_error: (m.var / m.n as f64).sqrt(),
            n_paths: m.n,
            seed: settings.seed,
        };
        let side = edit.side();
        let consistent = match side {
            Side::Insurer => delta_j.mean <= 3.0 * delta_j.std_error,
            Side::Market => delta_j.mean >= -3.0 * delta_j.std_error,
            Side::Neither => delta_j.mean == 0.0,
        };
        out.push(SaddleCheckRow { edit, side, delta_j, consistent });
    }
    Ok(out)
}

/// Closed-form saddle controls with the retention multiplied by `factor`.
pub fn candidate_with_retention_scale(
    cfg: &ModelConfig,
    factor: f64,
) -> impl Fn(f64, f64, f64) -> Result<SaddleControls> + '_ {
    move |t, x, y| {
        let mut s = saddle_feedback(cfg, t, x, y)?;
        s.u *= factor;
        Ok(s)
    }
}
