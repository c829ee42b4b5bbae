use std::io::Write;
use std::path::Path;

use mmv_core::closed_form::{
    expected_wealth_optimal, frontier_for_target_mean, frontier_from_theta, mean_only_value,
    mmv_value, riskless_wealth, value_function, y_second_moment,
};
use mmv_core::export::{
    stat_rows, write_frontier_csv, write_jump_log_csv, write_stats_csv, write_trajectory_csv,
    write_values_csv,
};
use mmv_core::mmv_discrete::{mmv_truncation, mmv_waterfill, mv_utility};
use mmv_core::sde::{mc_objective_and_stats, mc_terminal_stats, simulate_path_indexed};
use mmv_core::verifier::{
    candidate_with_retention_scale, hjbi_scan_candidate, mc_saddle_check, SaddleCheckRow,
    SaddleReport, ScanGrid,
};
use mmv_core::{
    DiscreteRv, EquilibriumStrategy, FeedbackStrategy, FrontierPoint, McSettings, ModelConfig,
    SimulationMode, StrategyEdit, ZeroStrategy,
};

use crate::output::Outputs;
use crate::{
    Cli, CliError, CliResult, Example61Args, Experiment62Args, FrontierArgs, McArgs, ModeChoice,
    MmvEvalArgs, RunManifest, SimulateArgs, StrategyChoice, ValueArgs, VerifyArgs,
};

/// Relative tolerance of the closed-form identity checks.
pub const IDENTITY_TOL: f64 = 1e-9;

/// Agreement required between the two evaluators of the monotone preference.
pub const ALGORITHM_TOL: f64 = 1e-8;

/// Paired deviations of the Monte Carlo saddle check.
pub const CANONICAL_DEVIATIONS: [StrategyEdit; 6] = [
    StrategyEdit::ScalePi(1.5),
    StrategyEdit::ScalePi(0.5),
    StrategyEdit::ScaleU(1.5),
    StrategyEdit::ShiftP(0.2),
    StrategyEdit::ShiftP(-0.2),
    StrategyEdit::ScaleQ(1.5),
];

fn load(path: &Path) -> CliResult<ModelConfig> {
    ModelConfig::load(path).map_err(|e| match e {
        mmv_core::Error::Io(io) => CliError::Usage(format!("cannot read {}: {io}", path.display())),
        other => other.into(),
    })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= IDENTITY_TOL * a.abs().max(b.abs()).max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueSummary {
    pub mmv_value: f64,
    pub phi: f64,
    pub riskless: f64,
    pub mean: f64,
    pub variance: f64,
}

impl ValueSummary {
    fn rows(&self) -> [(&'static str, f64); 5] {
        [
            ("mmv_value", self.mmv_value),
            ("phi", self.phi),
            ("riskless_wealth", self.riskless),
            ("mean_terminal_wealth", self.mean),
            ("var_terminal_wealth", self.variance),
        ]
    }
}

/// Closed-form summary, refused unless the duality identity, the
/// mean-variance form of the value and the linear frontier law all hold.
pub fn value_summary(cfg: &ModelConfig) -> CliResult<ValueSummary> {
    let riskless = riskless_wealth(cfg, cfg.horizon);
    if cfg.theta == 0.0 {
        let v = mean_only_value(cfg);
        return Ok(ValueSummary { mmv_value: v, phi: v, riskless, mean: v, variance: 0.0 });
    }
    let theta = cfg.theta;
    let s = ValueSummary {
        mmv_value: mmv_value(cfg)?,
        phi: value_function(cfg, 0.0, cfg.x0, 1.0)?,
        riskless,
        mean: expected_wealth_optimal(cfg, cfg.horizon)?,
        variance: frontier_from_theta(cfg)?.variance,
    };
    let duality = riskless + cfg.rho_integral(0.0, cfg.horizon).exp_m1() / (2.0 * theta);
    let checks = [
        ("duality identity", s.mmv_value, duality),
        ("mean-variance form", s.mmv_value, s.mean - 0.5 * theta * s.variance),
        ("linear frontier law", s.variance * theta, s.mean - riskless),
    ];
    for (name, lhs, rhs) in checks {
        if !close(lhs, rhs) {
            return Err(CliError::CrossCheck(format!("{name}: {lhs} vs {rhs}")));
        }
    }
    Ok(s)
}

pub fn cmd_value(cli: &Cli, args: &ValueArgs, out: &mut dyn Write) -> CliResult<RunManifest> {
    let cfg = load(&args.config)?;
    let mut files = Outputs::new(&cli.out)?;
    let summary = if args.theta_infinite {
        let r = riskless_wealth(&cfg, cfg.horizon);
        ValueSummary { mmv_value: r, phi: r, riskless: r, mean: r, variance: 0.0 }
    } else {
        value_summary(&cfg)?
    };
    for (name, v) in summary.rows() {
        writeln!(out, "{name:<22} {v:.10}")?;
    }
    write_values_csv(&summary.rows(), files.create("value.csv")?)?;
    files.finish("value", Some(&args.config), None)
}

pub fn cmd_frontier(cli: &Cli, args: &FrontierArgs, out: &mut dyn Write) -> CliResult<RunManifest> {
    let cfg = load(&args.config)?;
    let points: Vec<FrontierPoint> = match (&args.grid.theta, &args.grid.xi) {
        (Some(thetas), _) => {
            if thetas.is_empty() || thetas.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                return Err(CliError::Usage("theta grid must be nonempty, finite and positive".into()));
            }
            thetas.iter().map(|&t| frontier_from_theta(&cfg.with_theta(t))).collect::<Result<_, _>>()?
        }
        (None, Some(xis)) => {
            if xis.is_empty() || xis.iter().any(|x| !x.is_finite()) {
                return Err(CliError::Usage("xi grid must be nonempty and finite".into()));
            }
            xis.iter().map(|&x| frontier_for_target_mean(&cfg, x)).collect::<Result<_, _>>()?
        }
        (None, None) => return Err(CliError::Usage("give --theta or --xi".into())),
    };
    let mut files = Outputs::new(&cli.out)?;
    writeln!(out, "{:>12} {:>14} {:>14}", "theta", "mean", "variance")?;
    for p in &points {
        writeln!(out, "{:>12} {:>14.10} {:>14.10}", p.theta, p.mean, p.variance)?;
    }
    write_frontier_csv(&points, files.create("frontier.csv")?)?;
    files.finish("frontier", Some(&args.config), None)
}

fn settings(cli: &Cli, cfg: &ModelConfig, mc: &McArgs, mode: SimulationMode) -> CliResult<McSettings> {
    let dt = mc.dt.unwrap_or_else(|| McSettings::default_dt(cfg));
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(CliError::Usage(format!("dt must be positive, got {dt}")));
    }
    if mc.paths < 2 {
        return Err(CliError::Usage(format!("need at least 2 paths, got {}", mc.paths)));
    }
    Ok(McSettings::new(mc.paths, mc.seed, dt).with_mode(mode).with_threads(cli.threads))
}

/// Simulates, writes `stats.csv` and the first `dump` trajectories.
fn simulate_into<S: FeedbackStrategy>(
    cfg: &ModelConfig,
    strategy: &S,
    settings: &McSettings,
    dump: usize,
    s0: f64,
    files: &mut Outputs,
    out: &mut dyn Write,
) -> CliResult<Vec<mmv_core::export::StatRow>> {
    let rows = if cfg.theta > 0.0 {
        let (obj, stats) = mc_objective_and_stats(cfg, strategy, settings)?;
        writeln!(out, "clamped controls: {}", stats.clamp_count)?;
        stat_rows(Some(&obj), &stats)
    } else {
        let stats = mc_terminal_stats(cfg, strategy, settings)?;
        writeln!(out, "clamped controls: {}", stats.clamp_count)?;
        stat_rows(None, &stats)
    };
    writeln!(out, "{:<16} {:>14} {:>12}", "quantity", "estimate", "std_error")?;
    for r in &rows {
        writeln!(out, "{:<16} {:>14.8} {:>12.3e}", r.quantity, r.estimate.mean, r.estimate.std_error)?;
    }
    write_stats_csv(&rows, files.create("stats.csv")?)?;
    for i in 0..dump.min(settings.n_paths) {
        let path = simulate_path_indexed(cfg, strategy, settings.seed, i as u64, settings.dt, settings.mode)?;
        write_trajectory_csv(&path, cfg, s0, files.create(&format!("trajectory_{i}.csv"))?)?;
        write_jump_log_csv(&path, files.create(&format!("jumps_{i}.csv"))?)?;
    }
    Ok(rows)
}

pub fn cmd_simulate(cli: &Cli, args: &SimulateArgs, out: &mut dyn Write) -> CliResult<RunManifest> {
    let cfg = load(&args.config)?;
    let mode = match args.mode {
        ModeChoice::Jumps => SimulationMode::Jumps,
        ModeChoice::Diffusion => SimulationMode::DiffusionApprox,
    };
    let settings = settings(cli, &cfg, &args.mc, mode)?;
    let mut files = Outputs::new(&cli.out)?;
    match args.strategy {
        StrategyChoice::Equilibrium => {
            let eq = EquilibriumStrategy::new(&cfg)?;
            simulate_into(&cfg, &eq, &settings, args.dump, args.s0, &mut files, out)?;
        }
        StrategyChoice::Zero => {
            simulate_into(&cfg, &ZeroStrategy, &settings, args.dump, args.s0, &mut files, out)?;
        }
    }
    files.finish("simulate", Some(&args.config), Some(args.mc.seed))
}

fn write_saddle_mc(rows: &[SaddleCheckRow], w: impl Write) -> CliResult<()> {
    let mut w = w;
    writeln!(w, "deviation,side,delta_j,std_error,n_paths,seed,consistent")?;
    for r in rows {
        let e = r.delta_j;
        writeln!(w, "{},{:?},{},{},{},{},{}", r.edit, r.side, e.mean, e.std_error, e.n_paths, e.seed, r.consistent)?;
    }
    w.flush()?;
    Ok(())
}

fn report_scan(report: &SaddleReport, tol: f64, out: &mut dyn Write) -> CliResult<bool> {
    writeln!(out, "saddle residual      max |L phi| = {:.3e}  ({})", report.max_abs_residual_at_saddle, verdict(report.saddle_ok(tol)))?;
    writeln!(out, "insurer deviations   max L phi   = {:.3e}  ({})", report.max_over_insurer_deviations, verdict(report.insurer_ok(tol)))?;
    writeln!(out, "market deviations    min L phi   = {:.3e}  ({})", report.min_over_market_deviations, verdict(report.market_ok(tol)))?;
    let ok = report.passed(tol);
    if !ok {
        if let Some(r) = report.worst_offender() {
            writeln!(out, "worst offender: t={} x={} y={} control={} delta={} value={:e}", r.t, r.x, r.y, r.control, r.delta, r.value)?;
        }
    }
    Ok(ok)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAIL"
    }
}

pub fn cmd_verify(cli: &Cli, args: &VerifyArgs, out: &mut dyn Write) -> CliResult<RunManifest> {
    let cfg = load(&args.config)?;
    if !(args.retention_scale.is_finite() && args.retention_scale >= 0.0) {
        return Err(CliError::Usage("retention scale must be finite and >= 0".into()));
    }
    let grid = ScanGrid { t: args.t.clone(), x: args.x.clone(), y: args.y.clone(), deltas: args.deltas.clone() };
    let report = hjbi_scan_candidate(&cfg, &grid, candidate_with_retention_scale(&cfg, args.retention_scale))?;
    let mut files = Outputs::new(&cli.out)?;
    report.write_csv(files.create("saddle_report.csv")?)?;
    let mut ok = report_scan(&report, args.tol, out)?;
    if args.mc_paths > 0 {
        let mc = McArgs { paths: args.mc_paths, seed: args.seed, dt: args.dt };
        let s = settings(cli, &cfg, &mc, SimulationMode::Jumps)?;
        let rows = mc_saddle_check(&cfg, &CANONICAL_DEVIATIONS, &s)?;
        for r in &rows {
            writeln!(out, "{:<8} {:?}: dJ = {:+.6} +- {:.6} ({})", r.edit.to_string(), r.side, r.delta_j.mean, r.delta_j.std_error, verdict(r.consistent))?;
        }
        ok &= rows.iter().all(|r| r.consistent);
        write_saddle_mc(&rows, files.create("saddle_mc.csv")?)?;
    }
    let manifest = files.finish("verify", Some(&args.config), (args.mc_paths > 0).then_some(args.seed))?;
    if ok {
        Ok(manifest)
    } else {
        Err(CliError::Verification("saddle-point conditions violated; see saddle_report.csv".into()))
    }
}

/// Parses `uniform(a,b,n)`.
pub fn parse_builtin(law: &str) -> CliResult<DiscreteRv> {
    let bad = || CliError::Usage(format!("unknown law {law:?}; expected uniform(a,b,n)"));
    let inner = law.trim().strip_prefix("uniform(").and_then(|s| s.strip_suffix(')')).ok_or_else(bad)?;
    let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(bad());
    };
    let a: f64 = a.parse().map_err(|_| bad())?;
    let b: f64 = b.parse().map_err(|_| bad())?;
    let n: usize = n.parse().map_err(|_| bad())?;
    Ok(DiscreteRv::uniform_midpoint(a, b, n)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmvComparison {
    pub mean: f64,
    pub variance: f64,
    pub mv: f64,
    pub waterfill: f64,
    pub truncation: f64,
    pub kappa: Option<f64>,
}

/// Both evaluators of the monotone preference, required to agree.
pub fn compare_mmv(x: &DiscreteRv, theta: f64) -> CliResult<MmvComparison> {
    let wf = mmv_waterfill(x, theta)?;
    let tr = mmv_truncation(x, theta)?;
    if (wf.value - tr.value).abs() > ALGORITHM_TOL * (1.0 + tr.value.abs()) {
        return Err(CliError::CrossCheck(format!("water-filling {} vs truncation {}", wf.value, tr.value)));
    }
    Ok(MmvComparison {
        mean: x.mean(),
        variance: x.variance(),
        mv: mv_utility(x, theta)?,
        waterfill: wf.value,
        truncation: tr.value,
        kappa: tr.kappa,
    })
}

pub fn cmd_mmv_eval(cli: &Cli, args: &MmvEvalArgs, out: &mut dyn Write) -> CliResult<RunManifest> {
    let law = match (&args.law.atoms, &args.law.builtin) {
        (Some(path), _) => DiscreteRv::from_csv_path(path)?,
        (None, Some(law)) => parse_builtin(law)?,
        (None, None) => return Err(CliError::Usage("give --atoms or --builtin".into())),
    };
    let law = law.shift(args.shift);
    let c = compare_mmv(&law, args.theta)?;
    let kappa = c.kappa.unwrap_or(f64::INFINITY);
    let rows = [
        ("mean", c.mean),
        ("variance", c.variance),
        ("mv_utility", c.mv),
        ("mmv_waterfill", c.waterfill),
        ("mmv_truncation", c.truncation),
        ("kappa", kappa),
    ];
    for (name, v) in rows {
        writeln!(out, "{name:<16} {v:.10}")?;
    }
    let mut files = Outputs::new(&cli.out)?;
    write_values_csv(&rows, files.create("mmv.csv")?)?;
    files.finish("mmv-eval", args.law.atoms.as_deref(), None)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example61 {
    pub constant: MmvComparison,
    pub uniform: MmvComparison,
}

/// `X0 = 10` and `X1 = 10 + U(0, 12)` on `n` midpoint atoms, `theta = 2`.
pub fn example_6_1(n: usize) -> CliResult<Example61> {
    let theta = 2.0;
    Ok(Example61 {
        constant: compare_mmv(&DiscreteRv::constant(10.0)?, theta)?,
        uniform: compare_mmv(&DiscreteRv::uniform_midpoint(0.0, 12.0, n)?.shift(10.0), theta)?,
    })
}

pub fn cmd_example_6_1(cli: &Cli, args: &Example61Args, out: &mut dyn Write) -> CliResult<RunManifest> {
    let e = example_6_1(args.atoms)?;
    let sqrt3 = 3f64.sqrt();
    let exact_v1 = 39.0 / 4.0 + 4.0 * sqrt3 / 3.0;
    let kappa = e.uniform.kappa.unwrap_or(f64::INFINITY);
    writeln!(out, "{:<10} {:>14} {:>14} {:>14}", "", "computed", "truncation", "exact")?;
    writeln!(out, "{:<10} {:>14.6} {:>14} {:>14.6}", "U_2(X0)", e.constant.mv, "", 10.0)?;
    writeln!(out, "{:<10} {:>14.6} {:>14} {:>14.6}", "U_2(X1)", e.uniform.mv, "", 4.0)?;
    writeln!(out, "{:<10} {:>14} {:>14.6} {:>14.6}", "kappa", "", kappa, 10.0 + 2.0 * sqrt3)?;
    writeln!(out, "{:<10} {:>14.6} {:>14.6} {:>14.6}", "V_2(X0)", e.constant.waterfill, e.constant.truncation, 10.0)?;
    writeln!(out, "{:<10} {:>14.6} {:>14.6} {:>14.6}", "V_2(X1)", e.uniform.waterfill, e.uniform.truncation, exact_v1)?;
    writeln!(
        out,
        "V_2(X1) {} V_2(X0) while U_2(X1) {} U_2(X0)",
        if e.uniform.waterfill > e.constant.waterfill { ">" } else { "<=" },
        if e.uniform.mv < e.constant.mv { "<" } else { ">=" },
    )?;
    let rows = [
        ("U2_X0", e.constant.mv),
        ("U2_X1", e.uniform.mv),
        ("kappa_X1", kappa),
        ("V2_X0_waterfill", e.constant.waterfill),
        ("V2_X0_truncation", e.constant.truncation),
        ("V2_X1_waterfill", e.uniform.waterfill),
        ("V2_X1_truncation", e.uniform.truncation),
    ];
    let mut files = Outputs::new(&cli.out)?;
    write_values_csv(&rows, files.create("example_6_1.csv")?)?;
    files.finish("example-6-1", None, None)
}

pub fn cmd_experiment_6_2(cli: &Cli, args: &Experiment62Args, out: &mut dyn Write) -> CliResult<RunManifest> {
    let cfg = match &args.config {
        Some(p) => load(p)?,
        None => ModelConfig::baseline(),
    };
    let summary = value_summary(&cfg)?;
    let mut files = Outputs::new(&cli.out)?;
    writeln!(out, "closed form")?;
    for (name, v) in summary.rows() {
        writeln!(out, "  {name:<22} {v:.10}")?;
    }
    write_values_csv(&summary.rows(), files.create("value.csv")?)?;

    writeln!(out, "saddle-point scan")?;
    let report = mmv_core::verifier::hjbi_scan(&cfg, &ScanGrid::standard())?;
    report.write_csv(files.create("saddle_report.csv")?)?;
    let scan_ok = report_scan(&report, mmv_core::verifier::SCAN_TOLERANCE, out)?;

    writeln!(out, "simulation")?;
    let settings = settings(cli, &cfg, &args.mc, SimulationMode::Jumps)?;
    let eq = EquilibriumStrategy::new(&cfg)?;
    let rows = simulate_into(&cfg, &eq, &settings, args.dump, args.s0, &mut files, out)?;
    let targets = [
        ("J", summary.phi),
        ("mean_x", summary.mean),
        ("var_x", summary.variance),
        ("mean_y", 1.0),
        ("second_moment_y", y_second_moment(&cfg, cfg.horizon)),
    ];
    let mut cmp = files.create("comparison.csv")?;
    writeln!(cmp, "quantity,closed_form,estimate,std_error,z")?;
    writeln!(out, "{:<16} {:>12} {:>12} {:>8}", "quantity", "closed form", "estimate", "z")?;
    for (name, target) in targets {
        let e = rows.iter().find(|r| r.quantity == name).expect("stat row").estimate;
        let z = (e.mean - target) / e.std_error;
        writeln!(cmp, "{name},{target},{},{},{z}", e.mean, e.std_error)?;
        writeln!(out, "{name:<16} {target:>12.6} {:>12.6} {z:>8.2}", e.mean)?;
    }
    cmp.flush()?;
    drop(cmp);
    let manifest = files.finish("experiment-6-2", args.config.as_deref(), Some(args.mc.seed))?;
    if scan_ok {
        Ok(manifest)
    } else {
        Err(CliError::Verification("saddle-point conditions violated".into()))
    }
}
