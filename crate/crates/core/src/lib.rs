//! Monotone mean-variance investment and reinsurance for an insurer whose
//! surplus follows the Cramér-Lundberg model, with a stock and a bond.
//!
//! The crate provides the closed-form value function, saddle-point
//! strategies and efficient frontier ([`closed_form`]), an evaluator of the
//! preference for finite-support laws ([`mmv_discrete`]), a seeded Monte
//! Carlo engine for the wealth and density processes ([`sde`]), and
//! deterministic and simulated checks of the saddle point ([`verifier`]).

pub mod closed_form;
pub mod config;
pub mod error;
pub mod export;
pub mod mmv_discrete;
pub mod params;
pub mod quadrature;
pub mod sde;
pub mod verifier;

pub use closed_form::{
    FrontierPoint, InsurerControls, OdeCoefficients, SaddleControls, StartState,
};
pub use error::{Error, Result};
pub use mmv_discrete::{DiscreteRv, MmvResult};
pub use params::{
    ClaimModel, ClaimSizeLaw, CoefficientSchedule, InsuranceParams, MarketParams, ModelConfig,
    StockParams, Violation,
};
pub use sde::{
    EquilibriumStrategy, FeedbackStrategy, McEstimate, McSettings, PathRecord, SimulationMode,
    StrategyEdit, StrategyKind, ZeroStrategy,
};
pub use verifier::{GeneratorInput, JumpControl, SaddleCheckRow, SaddleReport, ScanGrid};
