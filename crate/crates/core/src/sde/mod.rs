//! Monte Carlo simulation of the controlled wealth and density processes.

mod estimate;
mod noise;
mod path;
mod strategy;

pub use estimate::{
    mc_density_means, mc_game_objective, mc_objective_and_stats, mc_terminal_stats, GameObjective, McEstimate, McSettings,
    TerminalStats,
};
pub(crate) use estimate::{moments, objective_samples, simulate_terminals};
pub use path::{
    pathwise_identity_residual, simulate_diffusion_approx, simulate_path, simulate_path_indexed,
    JumpEvent, PathRecord, SimulationMode,
};
pub use strategy::{
    Deviated, EquilibriumStrategy, FeedbackStrategy, Side, StrategyEdit, StrategyKind,
    ZeroStrategy,
};
