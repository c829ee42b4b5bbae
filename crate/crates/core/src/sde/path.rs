//! Path simulation of the wealth `X` and the density process `Y`.
//!
//! The grid is uniform with claim times inserted. On each piece the controls
//! are frozen at the left end. Wealth is advanced with exact compounding of
//! the riskless rate and the frozen drift, plus Euler noise `pi sigma dW`.
//! Claims are paid as `u z` at their arrival times, with the drift carrying
//! `+u mu0` so that the claim part is written against the compensated
//! measure. `Y` takes the linear Euler step
//! `Y (1 + p dW - dt \int q dv)` and the jump factor `1 + q(z)`; it is
//! absorbed at zero.

use crate::closed_form::{benchmark_wealth, StartState};
use crate::error::{Error, Result};
use crate::params::{validate_config, ModelConfig};

use super::noise::{bridge_sample, brownian_path, claim_arrivals, stream_rng, ClaimSampler, Stream};
use super::strategy::{FeedbackStrategy, StrategyKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SimulationMode {
    /// Compound Poisson claims.
    #[default]
    Jumps,
    /// Claims replaced by drift `mu0` and volatility `sigma0` on an
    /// independent Brownian motion.
    DiffusionApprox,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub size: f64,
    /// Retention applied to this claim.
    pub u_before: f64,
    /// Retention chosen right after the claim.
    pub u_after: f64,
    /// Index of the post-jump node in the path record.
    pub node: usize,
}

/// One simulated path. Node `i` holds the state at `times[i]` and the
/// controls chosen there; a node at a claim time holds the post-claim state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathRecord {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub pi: Vec<f64>,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    /// The market Brownian motion.
    pub w: Vec<f64>,
    pub jumps: Vec<JumpEvent>,
    pub clamp_count: u64,
    pub n_steps: usize,
    pub kind: Option<StrategyKind>,
    pub mode: SimulationMode,
}

impl PathRecord {
    pub fn terminal_x(&self) -> f64 {
        *self.x.last().unwrap()
    }

    pub fn terminal_y(&self) -> f64 {
        *self.y.last().unwrap()
    }

    /// Geometric Brownian stock price driven by the path's Brownian motion,
    /// for plotting against the investment.
    pub fn stock_proxy(&self, cfg: &ModelConfig, s0: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.times.len());
        let mut s = s0;
        out.push(s);
        for i in 1..self.times.len() {
            let t = self.times[i - 1];
            if let Some(stock) = &cfg.market.stock {
                let (mu, sig) = (stock.mu.at(t), stock.sigma.at(t));
                let dt = self.times[i] - t;
                s *= ((mu - 0.5 * sig * sig) * dt + sig * (self.w[i] - self.w[i - 1])).exp();
            }
            out.push(s);
        }
        out
    }

    fn push_node(&mut self, t: f64, x: f64, y: f64, w: f64, c: &Controls) {
        self.times.push(t);
        self.x.push(x);
        self.y.push(y);
        self.w.push(w);
        self.pi.push(c.pi);
        self.u.push(c.u);
        self.p.push(c.p);
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Terminal {
    pub x: f64,
    pub y: f64,
    pub clamps: u64,
}

#[derive(Debug, Clone, Copy)]
struct Controls {
    pi: f64,
    u: f64,
    p: f64,
    /// `\int q dv` with jumps, the claim-noise control otherwise.
    second: f64,
}

#[derive(Default)]
pub(crate) struct Scratch {
    w: Vec<f64>,
    w0: Vec<f64>,
    arrivals: Vec<(f64, f64)>,
    fixes: Vec<Correction>,
}

/// Change of wealth loadings at a claim time inside a grid step, and the
/// claim paid there.
#[derive(Debug, Clone, Copy)]
struct Correction {
    time: f64,
    w: f64,
    drift: f64,
    vol: f64,
    loss: f64,
}

pub(crate) fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    let n = (horizon / dt * (1.0 - 1e-12)).ceil();
    if n > 1e9 {
        return Err(Error::Domain(format!("time step {dt} too small")));
    }
    Ok((n as usize).max(1))
}

fn market_at(cfg: &ModelConfig, t: f64) -> (f64, f64) {
    match &cfg.market.stock {
        Some(s) => (s.mu.at(t) - cfg.market.r.at(t), s.sigma.at(t)),
        None => (0.0, 0.0),
    }
}

pub(crate) struct Engine<'a, S> {
    cfg: &'a ModelConfig,
    strategy: &'a S,
    mode: SimulationMode,
    n: usize,
    h: f64,
    growth: Vec<f64>,
    annuity: Vec<f64>,
    /// `(mu - r, sigma)` at each grid node.
    market: Vec<(f64, f64)>,
    sampler: ClaimSampler,
    mu0: f64,
    sigma0: f64,
    loading: f64,
}

impl<'a, S: FeedbackStrategy> Engine<'a, S> {
    pub(crate) fn new(cfg: &'a ModelConfig, strategy: &'a S, dt: f64, mode: SimulationMode) -> Result<Self> {
        let violations = validate_config(cfg);
        if !violations.is_empty() {
            return Err(Error::InvalidConfig(violations));
        }
        let n = step_count(cfg.horizon, dt)?;
        let h = cfg.horizon / n as f64;
        let node = |k: usize| if k == n { cfg.horizon } else { k as f64 * h };
        let growth = (0..n).map(|k| cfg.rate_integral(node(k), node(k + 1)).exp()).collect();
        let annuity = (0..n).map(|k| cfg.compounded_annuity(node(k), node(k + 1))).collect();
        let market = (0..n).map(|k| market_at(cfg, node(k))).collect();
        Ok(Engine {
            cfg,
            strategy,
            mode,
            n,
            h,
            growth,
            annuity,
            market,
            sampler: ClaimSampler::new(&cfg.claims)?,
            mu0: cfg.claims.mu0(),
            sigma0: cfg.claims.sigma0_sq().sqrt(),
            loading: cfg.loading_drift(),
        })
    }

    fn node_time(&self, k: usize) -> f64 {
        if k == self.n {
            self.cfg.horizon
        } else {
            k as f64 * self.h
        }
    }

    fn controls(&self, t: f64, x: f64, y: f64, clamps: &mut u64) -> Result<Controls> {
        let ins = self.strategy.insurer(t, x, y);
        let p = self.strategy.diffusion_control(t, x, y);
        let second = if !self.cfg.claims.is_active() {
            0.0
        } else {
            match self.mode {
                SimulationMode::Jumps => self.strategy.jump_compensator(t, x, y, &self.cfg.claims),
                SimulationMode::DiffusionApprox => {
                    self.strategy.claim_diffusion_control(t, x, y, &self.cfg.claims)
                }
            }
        };
        if !(ins.pi.is_finite() && ins.u.is_finite() && p.is_finite() && second.is_finite()) {
            return Err(Error::Simulation(format!(
                "non-finite control at t = {t}: pi = {}, u = {}, p = {p}, {second}",
                ins.pi, ins.u
            )));
        }
        let mut u = ins.u;
        if u < 0.0 {
            u = 0.0;
            *clamps += 1;
        }
        Ok(Controls { pi: ins.pi, u, p, second })
    }

    /// Wealth drift and Brownian loading of frozen controls.
    fn loadings(&self, market: (f64, f64), c: &Controls) -> (f64, f64) {
        let (excess, sigma) = market;
        let mut drift = c.pi * excess + self.mu0 * self.cfg.insurance.kappa_r * c.u + self.loading;
        if self.mode == SimulationMode::Jumps {
            drift += c.u * self.mu0;
        }
        (drift, c.pi * sigma)
    }

    /// Linear Euler step of the density over a piece of length `len`.
    fn density_step(&self, c: &Controls, len: f64, dw: f64, dw0: f64, y: &mut f64) {
        let factor = match self.mode {
            SimulationMode::Jumps => 1.0 + c.p * dw - c.second * len,
            SimulationMode::DiffusionApprox => 1.0 + c.p * dw + c.second * dw0,
        };
        *y = if *y > 0.0 && factor > 0.0 { *y * factor } else { 0.0 };
    }

    /// Growth and compounded annuity of the riskless rate from `a` to the
    /// end of grid step `k`, or to `b` inside it.
    fn compounding(&self, k: usize, a: f64, b: f64) -> (f64, f64) {
        if a == self.node_time(k) && b == self.node_time(k + 1) {
            (self.growth[k], self.annuity[k])
        } else {
            (self.cfg.rate_integral(a, b).exp(), self.cfg.compounded_annuity(a, b))
        }
    }

    /// Wealth at `end` inside grid step `k`. The increment over the whole
    /// step uses the controls at its start; claims and control changes at
    /// claim times enter as corrections, so a claim that changes nothing
    /// leaves the arithmetic of the step untouched.
    #[allow(clippy::too_many_arguments)]
    fn wealth_at(&self, k: usize, x0: f64, base: (f64, f64), extra_noise: f64, fixes: &[Correction], w: &[f64], end: f64, w_end: f64) -> f64 {
        let t0 = self.node_time(k);
        let (growth, annuity) = self.compounding(k, t0, end);
        let mut x = x0 * growth + base.0 * annuity + (base.1 * (w_end - w[k]) + extra_noise);
        for f in fixes {
            let (g, a) = self.compounding(k, f.time, end);
            x += f.drift * a + f.vol * (w_end - f.w) - f.loss * g;
        }
        x
    }

    pub(crate) fn run(
        &self,
        seed: u64,
        index: u64,
        scratch: &mut Scratch,
        mut record: Option<&mut PathRecord>,
    ) -> Result<Terminal> {
        let (n, cfg) = (self.n, self.cfg);
        brownian_path(&mut stream_rng(seed, index, Stream::Market), n, self.h, &mut scratch.w);
        let claim_noise = self.mode == SimulationMode::DiffusionApprox && self.sigma0 > 0.0;
        if claim_noise {
            brownian_path(&mut stream_rng(seed, index, Stream::Claims), n, self.h, &mut scratch.w0);
        } else {
            scratch.w0.clear();
            scratch.w0.resize(n + 1, 0.0);
        }
        if self.mode == SimulationMode::Jumps {
            claim_arrivals(
                &mut stream_rng(seed, index, Stream::Arrivals),
                cfg.claims.intensity,
                &self.sampler,
                cfg.horizon,
                &mut scratch.arrivals,
            );
        } else {
            scratch.arrivals.clear();
        }
        let mut bridge = stream_rng(seed, index, Stream::Bridge);
        let (w, w0, arrivals, fixes) = (&scratch.w, &scratch.w0, &scratch.arrivals, &mut scratch.fixes);

        if let Some(rec) = record.as_deref_mut() {
            *rec = PathRecord {
                kind: Some(self.strategy.kind()),
                mode: self.mode,
                ..PathRecord::default()
            };
        }
        let mut x = cfg.x0;
        let mut y = 1.0;
        let mut clamps = 0u64;
        let mut steps = 0usize;
        let mut next_jump = 0usize;
        let mut pending: Option<JumpEvent> = None;

        for k in 0..n {
            let t0 = self.node_time(k);
            let t1 = self.node_time(k + 1);
            let x0 = x;
            fixes.clear();
            let mut ta = t0;
            let mut wa = w[k];
            let mut c = self.controls(ta, x, y, &mut clamps)?;
            let base = self.loadings(self.market[k], &c);
            let mut current = base;
            loop {
                if let Some(rec) = record.as_deref_mut() {
                    rec.push_node(ta, x, y, wa, &c);
                    if let Some(mut ev) = pending.take() {
                        ev.u_after = c.u;
                        ev.node = rec.times.len() - 1;
                        rec.jumps.push(ev);
                    }
                }
                steps += 1;
                match arrivals.get(next_jump) {
                    Some(&(tau, z)) if tau <= t1 => {
                        let w_tau = bridge_sample(&mut bridge, ta, wa, t1, w[k + 1], tau);
                        self.density_step(&c, tau - ta, w_tau - wa, 0.0, &mut y);
                        x = self.wealth_at(k, x0, base, 0.0, fixes, w, tau, w_tau);
                        let pre = self.controls(tau, x, y, &mut clamps)?;
                        let mut q = self.strategy.jump_control(tau, z, x, y);
                        if !q.is_finite() {
                            return Err(Error::Simulation(format!("non-finite jump control at t = {tau}")));
                        }
                        if q < -1.0 {
                            q = -1.0;
                            clamps += 1;
                        }
                        x -= pre.u * z;
                        y *= 1.0 + q;
                        pending = Some(JumpEvent {
                            time: tau,
                            size: z,
                            u_before: pre.u,
                            u_after: f64::NAN,
                            node: 0,
                        });
                        next_jump += 1;
                        c = self.controls(tau, x, y, &mut clamps)?;
                        let next = self.loadings(market_at(cfg, tau), &c);
                        fixes.push(Correction {
                            time: tau,
                            w: w_tau,
                            drift: next.0 - current.0,
                            vol: next.1 - current.1,
                            loss: pre.u * z,
                        });
                        current = next;
                        ta = tau;
                        wa = w_tau;
                    }
                    _ => {
                        let dw0 = w0[k + 1] - w0[k];
                        self.density_step(&c, t1 - ta, w[k + 1] - wa, dw0, &mut y);
                        let extra = if claim_noise { c.u * self.sigma0 * dw0 } else { 0.0 };
                        x = self.wealth_at(k, x0, base, extra, fixes, w, t1, w[k + 1]);
                        break;
                    }
                }
            }
        }
        if let Some(rec) = record {
            let mut unused = 0;
            let c = self.controls(cfg.horizon, x, y, &mut unused)?;
            rec.push_node(cfg.horizon, x, y, w[n], &c);
            if let Some(mut ev) = pending.take() {
                ev.u_after = c.u;
                ev.node = rec.times.len() - 1;
                rec.jumps.push(ev);
            }
            rec.clamp_count = clamps;
            rec.n_steps = steps;
        }
        Ok(Terminal { x, y, clamps })
    }
}

/// Simulates path `index` of the Monte Carlo run keyed by `seed`.
pub fn simulate_path_indexed<S: FeedbackStrategy>(
    cfg: &ModelConfig,
    strategy: &S,
    seed: u64,
    index: u64,
    dt: f64,
    mode: SimulationMode,
) -> Result<PathRecord> {
    let engine = Engine::new(cfg, strategy, dt, mode)?;
    let mut record = PathRecord::default();
    engine.run(seed, index, &mut Scratch::default(), Some(&mut record))?;
    Ok(record)
}

/// Simulates the first path of the run keyed by `seed`, with claims as
/// compound Poisson jumps.
pub fn simulate_path<S: FeedbackStrategy>(cfg: &ModelConfig, strategy: &S, seed: u64, dt: f64) -> Result<PathRecord> {
    simulate_path_indexed(cfg, strategy, seed, 0, dt, SimulationMode::Jumps)
}

/// As [`simulate_path`] with the diffusion approximation of the claims.
pub fn simulate_diffusion_approx<S: FeedbackStrategy>(
    cfg: &ModelConfig,
    strategy: &S,
    seed: u64,
    dt: f64,
) -> Result<PathRecord> {
    simulate_path_indexed(cfg, strategy, seed, 0, dt, SimulationMode::DiffusionApprox)
}

/// Largest deviation along an equilibrium path from the affine relation
/// `(1/theta) Y(t) exp(\int_t^T (rho - r)) = B(t) - X(t)`, where `B` is the
/// benchmark wealth of the game started at `(0, x0, 1)`.
pub fn pathwise_identity_residual(path: &PathRecord, cfg: &ModelConfig) -> Result<f64> {
    if path.kind != Some(StrategyKind::Equilibrium) {
        return Err(Error::Misuse(format!(
            "the affine relation holds only along equilibrium paths, got a {} path",
            path.kind.map_or("unlabelled".to_string(), |k| k.to_string())
        )));
    }
    let start = StartState::origin(cfg);
    let t_end = cfg.horizon;
    let mut worst = 0.0f64;
    for i in 0..path.times.len() {
        let t = path.times[i];
        let lhs = path.y[i] * (cfg.rho_integral(t, t_end) - cfg.rate_integral(t, t_end)).exp() / cfg.theta;
        let rhs = benchmark_wealth(cfg, t, start)? - path.x[i];
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}
