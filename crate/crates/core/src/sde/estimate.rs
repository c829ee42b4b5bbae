//! Monte Carlo estimators over independent seeded paths.
//!
//! Terminal values are gathered in path order and reduced sequentially, so
//! estimates are bit-identical for any number of worker threads.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::ModelConfig;

use super::path::{Engine, PathRecord, Scratch, SimulationMode, Terminal};
use super::strategy::FeedbackStrategy;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSettings {
    pub n_paths: usize,
    pub seed: u64,
    pub dt: f64,
    pub mode: SimulationMode,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl McSettings {
    pub fn new(n_paths: usize, seed: u64, dt: f64) -> Self {
        McSettings {
            n_paths,
            seed,
            dt,
            mode: SimulationMode::Jumps,
            threads: None,
        }
    }

    /// `1e-3 T / 3`.
    pub fn default_dt(cfg: &ModelConfig) -> f64 {
        1e-3 * cfg.horizon / 3.0
    }

    pub fn with_mode(self, mode: SimulationMode) -> Self {
        McSettings { mode, ..self }
    }

    pub fn with_threads(self, threads: Option<usize>) -> Self {
        McSettings { threads, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl McEstimate {
    /// `|mean - target| <= k * std_error`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameObjective {
    /// `E[X(T) Y(T) + Y(T)^2 / (2 theta)]`.
    pub j: McEstimate,
    /// `J - 1/(2 theta)`.
    pub i: McEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalStats {
    pub mean_x: McEstimate,
    pub var_x: McEstimate,
    pub mean_y: McEstimate,
    pub second_moment_y: McEstimate,
    pub clamp_count: u64,
}

/// Mean, unbiased variance and fourth central moment, accumulated in order.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Moments {
    pub n: usize,
    pub mean: f64,
    pub var: f64,
    pub m4: f64,
}

pub(crate) fn moments(values: &[f64]) -> Moments {
    let mut n = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for &v in values {
        n += 1;
        let delta = v - mean;
        mean += delta / n as f64;
        m2 += delta * (v - mean);
    }
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n.max(1) as f64;
    Moments {
        n,
        mean,
        var: if n > 1 { m2 / (n - 1) as f64 } else { 0.0 },
        m4,
    }
}

impl Moments {
    fn mean_estimate(&self, seed: u64) -> McEstimate {
        McEstimate {
            mean: self.mean,
            std_error: (self.var / self.n as f64).sqrt(),
            n_paths: self.n,
            seed,
        }
    }

    /// Sample variance with its delta-method standard error
    /// `sqrt((m4 - s^4) / n)`.
    fn variance_estimate(&self, seed: u64) -> McEstimate {
        let spread = (self.m4 - self.var * self.var).max(0.0);
        McEstimate {
            mean: self.var,
            std_error: (spread / self.n as f64).sqrt(),
            n_paths: self.n,
            seed,
        }
    }
}

fn run_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(job()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| Error::Simulation(e.to_string()))?;
            Ok(pool.install(job))
        }
    }
}

fn check_paths(n_paths: usize) -> Result<()> {
    if n_paths < 2 {
        return Err(Error::Domain(format!("need at least 2 paths, got {n_paths}")));
    }
    Ok(())
}

pub(crate) fn simulate_terminals<S: FeedbackStrategy>(
    cfg: &ModelConfig,
    strategy: &S,
    settings: &McSettings,
) -> Result<Vec<Terminal>> {
    check_paths(settings.n_paths)?;
    let engine = Engine::new(cfg, strategy, settings.dt, settings.mode)?;
    let seed = settings.seed;
    run_pool(settings.threads, || {
        (0..settings.n_paths as u64)
            .into_par_iter()
            .map_init(Scratch::default, |scratch, i| engine.run(seed, i, scratch, None))
            .collect::<Result<Vec<_>>>()
    })?
}

/// Per-path `X(T) Y(T) + Y(T)^2 / (2 theta)`.
pub(crate) fn objective_samples(cfg: &ModelConfig, terminals: &[Terminal]) -> Vec<f64> {
    let w = 0.5 / cfg.theta;
    terminals.iter().map(|t| t.x * t.y + w * t.y * t.y).collect()
}

fn require_theta(cfg: &ModelConfig) -> Result<()> {
    if cfg.theta > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("theta must be > 0, got {}", cfg.theta)))
    }
}

fn objective_from(cfg: &ModelConfig, terminals: &[Terminal], seed: u64) -> GameObjective {
    let j = moments(&objective_samples(cfg, terminals)).mean_estimate(seed);
    let i = McEstimate {
        mean: j.mean - 0.5 / cfg.theta,
        ..j
    };
    GameObjective { j, i }
}

fn stats_from(terminals: &[Terminal], seed: u64) -> TerminalStats {
    let xs: Vec<f64> = terminals.iter().map(|t| t.x).collect();
    let ys: Vec<f64> = terminals.iter().map(|t| t.y).collect();
    let y2: Vec<f64> = ys.iter().map(|y| y * y).collect();
    let mx = moments(&xs);
    TerminalStats {
        mean_x: mx.mean_estimate(seed),
        var_x: mx.variance_estimate(seed),
        mean_y: moments(&ys).mean_estimate(seed),
        second_moment_y: moments(&y2).mean_estimate(seed),
        clamp_count: terminals.iter().map(|t| t.clamps).sum(),
    }
}

pub fn mc_game_objective<S: FeedbackStrategy>(
    cfg: &ModelConfig,
    strategy: &S,
    settings: &McSettings,
) -> Result<GameObjective> {
    require_theta(cfg)?;
    let terminals = simulate_terminals(cfg, strategy, settings)?;
    Ok(objective_from(cfg, &terminals, settings.seed))
}

pub fn mc_terminal_stats<S: FeedbackStrategy>(
    cfg: &ModelConfig,
    strategy: &S,
    settings: &McSettings,
) -> Result<TerminalStats> {
    let terminals = simulate_terminals(cfg, strategy, settings)?;
    Ok(stats_from(&terminals, settings.seed))
}

/// Game objective and terminal statistics from one set of paths.
pub fn mc_objective_and_stats<S: FeedbackStrategy>(
    cfg: &ModelConfig,
    strategy: &S,
    settings: &McSettings,
) -> Result<(GameObjective, TerminalStats)> {
    require_theta(cfg)?;
    let terminals = simulate_terminals(cfg, strategy, settings)?;
    Ok((objective_from(cfg, &terminals, settings.seed), stats_from(&terminals, settings.seed)))
}

/// Sample means of `Y` at every `stride`-th grid node, from full path
/// records. Returns `(t, estimate)` pairs.
pub fn mc_density_means<S: FeedbackStrategy>(
    cfg: &ModelConfig,
    strategy: &S,
    settings: &McSettings,
    stride: usize,
) -> Result<Vec<(f64, McEstimate)>> {
    check_paths(settings.n_paths)?;
    let engine = Engine::new(cfg, strategy, settings.dt, settings.mode)?;
    let seed = settings.seed;
    let stride = stride.max(1);
    let rows: Vec<Vec<(f64, f64)>> = run_pool(settings.threads, || {
        (0..settings.n_paths as u64)
            .into_par_iter()
            .map_init(Scratch::default, |scratch, i| {
                let mut rec = PathRecord::default();
                engine.run(seed, i, scratch, Some(&mut rec))?;
                Ok(grid_nodes(&rec)
                    .step_by(stride)
                    .map(|k| (rec.times[k], rec.y[k]))
                    .collect())
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let cols = rows[0].len();
    Ok((0..cols)
        .map(|c| {
            let ys: Vec<f64> = rows.iter().map(|r| r[c].1).collect();
            (rows[0][c].0, moments(&ys).mean_estimate(seed))
        })
        .collect())
}

/// Indices of the uniform-grid nodes of a record (claim nodes skipped).
fn grid_nodes(rec: &PathRecord) -> impl Iterator<Item = usize> + '_ {
    let jump_nodes: std::collections::HashSet<usize> = rec.jumps.iter().map(|j| j.node).collect();
    (0..rec.times.len()).filter(move |k| !jump_nodes.contains(k))
}
