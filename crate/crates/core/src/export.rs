//! CSV artifacts. Every file has a header row, LF line endings and numbers
//! in shortest round-trip form.

use std::io::Write;

use crate::closed_form::FrontierPoint;
use crate::error::Result;
use crate::params::ModelConfig;
use crate::sde::{GameObjective, McEstimate, PathRecord, TerminalStats};

pub(crate) fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// Named scalar results: `quantity,value`.
pub fn write_values_csv(rows: &[(&str, f64)], out: impl Write) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["quantity", "value"])?;
    for (name, v) in rows {
        w.write_record([name.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `theta,mean,variance`.
pub fn write_frontier_csv(points: &[FrontierPoint], out: impl Write) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["theta", "mean", "variance"])?;
    for p in points {
        w.write_record([p.theta.to_string(), p.mean.to_string(), p.variance.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatRow {
    pub quantity: String,
    pub estimate: McEstimate,
}

/// Rows for the stats file, objective first when present.
pub fn stat_rows(objective: Option<&GameObjective>, stats: &TerminalStats) -> Vec<StatRow> {
    let mut rows = Vec::new();
    let mut push = |q: &str, e: McEstimate| rows.push(StatRow { quantity: q.to_string(), estimate: e });
    if let Some(o) = objective {
        push("J", o.j);
        push("I", o.i);
    }
    push("mean_x", stats.mean_x);
    push("var_x", stats.var_x);
    push("mean_y", stats.mean_y);
    push("second_moment_y", stats.second_moment_y);
    rows
}

/// `quantity,estimate,std_error,n_paths,seed`.
pub fn write_stats_csv(rows: &[StatRow], out: impl Write) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["quantity", "estimate", "std_error", "n_paths", "seed"])?;
    for r in rows {
        let e = &r.estimate;
        w.write_record([
            r.quantity.clone(),
            e.mean.to_string(),
            e.std_error.to_string(),
            e.n_paths.to_string(),
            e.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `t,x,y,pi,u,stock_proxy` with the stock started at `s0`.
pub fn write_trajectory_csv(path: &PathRecord, cfg: &ModelConfig, s0: f64, out: impl Write) -> Result<()> {
    let stock = path.stock_proxy(cfg, s0);
    let mut w = csv_writer(out);
    w.write_record(["t", "x", "y", "pi", "u", "stock_proxy"])?;
    for i in 0..path.times.len() {
        w.write_record([
            path.times[i].to_string(),
            path.x[i].to_string(),
            path.y[i].to_string(),
            path.pi[i].to_string(),
            path.u[i].to_string(),
            stock[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `t,z`.
pub fn write_jump_log_csv(path: &PathRecord, out: impl Write) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["t", "z"])?;
    for j in &path.jumps {
        w.write_record([j.time.to_string(), j.size.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
