//! Feedback strategies for both players of the game.

use std::fmt;

use crate::closed_form::{require_theta, InsurerControls};
use crate::error::{Error, Result};
use crate::params::{ClaimModel, ModelConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    Equilibrium,
    Zero,
    Custom,
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StrategyKind::Equilibrium => "equilibrium",
            StrategyKind::Zero => "zero",
            StrategyKind::Custom => "custom",
        })
    }
}

/// A Markov feedback pair: the insurer's `(pi, u)` and the market's
/// measure-change controls `p` (diffusion) and `q(z)` (jumps).
pub trait FeedbackStrategy: Sync {
    fn kind(&self) -> StrategyKind;

    fn insurer(&self, t: f64, x: f64, y: f64) -> InsurerControls;

    fn diffusion_control(&self, t: f64, x: f64, y: f64) -> f64;

    fn jump_control(&self, t: f64, z: f64, x: f64, y: f64) -> f64;

    /// `(a, b)` when `q(z) = a + b z`; lets the engine integrate `q` against
    /// the Levy measure in closed form.
    fn jump_affine(&self, _t: f64, _x: f64, _y: f64) -> Option<(f64, f64)> {
        None
    }

    /// `\int q(z) v(dz)`.
    fn jump_compensator(&self, t: f64, x: f64, y: f64, claims: &ClaimModel) -> f64 {
        if !claims.is_active() {
            return 0.0;
        }
        match self.jump_affine(t, x, y) {
            Some((a, b)) => claims.intensity * a + b * claims.mu0(),
            None => claims.levy_integral(|z| self.jump_control(t, z, x, y)),
        }
    }

    /// Measure-change control on the claim Brownian motion of the diffusion
    /// approximation: `-\int z q(z) v(dz) / sigma0`.
    fn claim_diffusion_control(&self, t: f64, x: f64, y: f64, claims: &ClaimModel) -> f64 {
        let s2 = claims.sigma0_sq();
        if !claims.is_active() || s2 <= 0.0 {
            return 0.0;
        }
        let moment = match self.jump_affine(t, x, y) {
            Some((a, b)) => a * claims.mu0() + b * s2,
            None => claims.levy_integral(|z| z * self.jump_control(t, z, x, y)),
        };
        -moment / s2.sqrt()
    }
}

impl<T: FeedbackStrategy + ?Sized> FeedbackStrategy for &T {
    fn kind(&self) -> StrategyKind {
        (**self).kind()
    }

    fn insurer(&self, t: f64, x: f64, y: f64) -> InsurerControls {
        (**self).insurer(t, x, y)
    }

    fn diffusion_control(&self, t: f64, x: f64, y: f64) -> f64 {
        (**self).diffusion_control(t, x, y)
    }

    fn jump_control(&self, t: f64, z: f64, x: f64, y: f64) -> f64 {
        (**self).jump_control(t, z, x, y)
    }

    fn jump_affine(&self, t: f64, x: f64, y: f64) -> Option<(f64, f64)> {
        (**self).jump_affine(t, x, y)
    }

    fn jump_compensator(&self, t: f64, x: f64, y: f64, claims: &ClaimModel) -> f64 {
        (**self).jump_compensator(t, x, y, claims)
    }

    fn claim_diffusion_control(&self, t: f64, x: f64, y: f64, claims: &ClaimModel) -> f64 {
        (**self).claim_diffusion_control(t, x, y, claims)
    }
}

/// Coefficients of the equilibrium on one piece of the market schedules.
#[derive(Debug, Clone, Copy)]
struct Piece {
    start: f64,
    /// `\int_start^T (rho - r)`.
    gap_to_end: f64,
    gap_rate: f64,
    investment_scale: f64,
    price_of_risk: f64,
}

/// The saddle-point feedback pair.
#[derive(Debug, Clone)]
pub struct EquilibriumStrategy {
    pieces: Vec<Piece>,
    inv_theta: f64,
    q_slope: f64,
}

impl EquilibriumStrategy {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        require_theta(cfg.theta)?;
        let mut starts = vec![0.0];
        starts.extend(cfg.breakpoints());
        let pieces = starts
            .iter()
            .map(|&s| Piece {
                start: s,
                gap_to_end: cfg.rho_integral(s, cfg.horizon) - cfg.rate_integral(s, cfg.horizon),
                gap_rate: crate::params::rho(cfg, s) - cfg.market.r.at(s),
                investment_scale: crate::closed_form::investment_scale(cfg, s),
                price_of_risk: crate::closed_form::market_price_of_risk(cfg, s),
            })
            .collect();
        Ok(EquilibriumStrategy {
            pieces,
            inv_theta: 1.0 / cfg.theta,
            q_slope: crate::closed_form::retention_scale(cfg),
        })
    }

    fn piece(&self, t: f64) -> &Piece {
        let j = self.pieces.partition_point(|p| p.start <= t).saturating_sub(1);
        &self.pieces[j]
    }

    pub fn q_slope(&self) -> f64 {
        self.q_slope
    }
}

impl FeedbackStrategy for EquilibriumStrategy {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Equilibrium
    }

    fn insurer(&self, t: f64, _x: f64, y: f64) -> InsurerControls {
        // (1/theta) y exp(\int_t^T (rho - r))
        let p = self.piece(t);
        let g = y * self.inv_theta * (p.gap_to_end - p.gap_rate * (t - p.start)).exp();
        InsurerControls {
            pi: p.investment_scale * g,
            u: self.q_slope * g,
        }
    }

    fn diffusion_control(&self, t: f64, _x: f64, _y: f64) -> f64 {
        self.piece(t).price_of_risk
    }

    fn jump_control(&self, _t: f64, z: f64, _x: f64, _y: f64) -> f64 {
        self.q_slope * z
    }

    fn jump_affine(&self, _t: f64, _x: f64, _y: f64) -> Option<(f64, f64)> {
        Some((0.0, self.q_slope))
    }
}

/// No investment, full cession, and no measure change.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroStrategy;

impl FeedbackStrategy for ZeroStrategy {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Zero
    }

    fn insurer(&self, _t: f64, _x: f64, _y: f64) -> InsurerControls {
        InsurerControls { pi: 0.0, u: 0.0 }
    }

    fn diffusion_control(&self, _t: f64, _x: f64, _y: f64) -> f64 {
        0.0
    }

    fn jump_control(&self, _t: f64, _z: f64, _x: f64, _y: f64) -> f64 {
        0.0
    }

    fn jump_affine(&self, _t: f64, _x: f64, _y: f64) -> Option<(f64, f64)> {
        Some((0.0, 0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Insurer,
    Market,
    /// The identity edit.
    Neither,
}

/// A one-sided modification of a strategy, applied throughout `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrategyEdit {
    Identity,
    ScalePi(f64),
    ShiftPi(f64),
    ScaleU(f64),
    ShiftU(f64),
    ShiftP(f64),
    /// `q -> c q`.
    ScaleQ(f64),
    /// `q(z) -> q(z) + d z`.
    ShiftQSlope(f64),
}

impl StrategyEdit {
    pub fn side(&self) -> Side {
        match self {
            StrategyEdit::Identity => Side::Neither,
            StrategyEdit::ScalePi(_)
            | StrategyEdit::ShiftPi(_)
            | StrategyEdit::ScaleU(_)
            | StrategyEdit::ShiftU(_) => Side::Insurer,
            StrategyEdit::ShiftP(_) | StrategyEdit::ScaleQ(_) | StrategyEdit::ShiftQSlope(_) => {
                Side::Market
            }
        }
    }

    /// Rejects edits that can leave the admissible set for a base strategy
    /// with `u >= 0` and `q(z) >= 0`.
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StrategyEdit::Identity => true,
            StrategyEdit::ScaleU(v) | StrategyEdit::ShiftU(v) | StrategyEdit::ScaleQ(v) => {
                v.is_finite() && v >= 0.0
            }
            StrategyEdit::ScalePi(v)
            | StrategyEdit::ShiftPi(v)
            | StrategyEdit::ShiftP(v)
            | StrategyEdit::ShiftQSlope(v) => v.is_finite(),
        };
        if !ok {
            Err(Error::Domain(format!("inadmissible deviation {self}")))
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for StrategyEdit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyEdit::Identity => write!(f, "none"),
            StrategyEdit::ScalePi(c) => write!(f, "pi*{c}"),
            StrategyEdit::ShiftPi(d) => write!(f, "pi{d:+}"),
            StrategyEdit::ScaleU(c) => write!(f, "u*{c}"),
            StrategyEdit::ShiftU(d) => write!(f, "u{d:+}"),
            StrategyEdit::ShiftP(d) => write!(f, "p{d:+}"),
            StrategyEdit::ScaleQ(c) => write!(f, "q*{c}"),
            StrategyEdit::ShiftQSlope(d) => write!(f, "q{d:+}z"),
        }
    }
}

/// A base strategy with one edit applied.
#[derive(Debug, Clone)]
pub struct Deviated<S> {
    base: S,
    edit: StrategyEdit,
}

impl<S: FeedbackStrategy> Deviated<S> {
    pub fn new(base: S, edit: StrategyEdit) -> Result<Self> {
        edit.validate()?;
        Ok(Deviated { base, edit })
    }

    pub fn edit(&self) -> StrategyEdit {
        self.edit
    }
}

impl<S: FeedbackStrategy> FeedbackStrategy for Deviated<S> {
    fn kind(&self) -> StrategyKind {
        match self.edit {
            StrategyEdit::Identity => self.base.kind(),
            _ => StrategyKind::Custom,
        }
    }

    fn insurer(&self, t: f64, x: f64, y: f64) -> InsurerControls {
        let mut c = self.base.insurer(t, x, y);
        match self.edit {
            StrategyEdit::ScalePi(k) => c.pi *= k,
            StrategyEdit::ShiftPi(d) => c.pi += d,
            StrategyEdit::ScaleU(k) => c.u *= k,
            StrategyEdit::ShiftU(d) => c.u += d,
            _ => {}
        }
        c
    }

    fn diffusion_control(&self, t: f64, x: f64, y: f64) -> f64 {
        let p = self.base.diffusion_control(t, x, y);
        match self.edit {
            StrategyEdit::ShiftP(d) => p + d,
            _ => p,
        }
    }

    fn jump_control(&self, t: f64, z: f64, x: f64, y: f64) -> f64 {
        let q = self.base.jump_control(t, z, x, y);
        match self.edit {
            StrategyEdit::ScaleQ(k) => k * q,
            StrategyEdit::ShiftQSlope(d) => q + d * z,
            _ => q,
        }
    }

    fn jump_affine(&self, t: f64, x: f64, y: f64) -> Option<(f64, f64)> {
        let (a, b) = self.base.jump_affine(t, x, y)?;
        Some(match self.edit {
            StrategyEdit::ScaleQ(k) => (k * a, k * b),
            StrategyEdit::ShiftQSlope(d) => (a, b + d),
            _ => (a, b),
        })
    }
}
