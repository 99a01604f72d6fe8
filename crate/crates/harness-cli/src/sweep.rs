use std::fmt::Write as _;

use rayon::prelude::*;

use crate::config::{ExperimentConfig, OptimizerName};
use crate::experiment::{run_point, RunOutput};
use crate::output::{fmt_f64, TrajectoryRow};
use crate::{HarnessError, Result};

/// Iteration windows (1-based, inclusive) whose mean loss is reported.
pub const WINDOWS: [(usize, usize); 3] = [(101, 200), (991, 1000), (4901, 5000)];

pub const SWEEP_HEADER: &str = "b0,optimizer,loss_101_200,loss_991_1000,loss_4901_5000,final_lr";

#[derive(Debug, Clone, PartialEq)]
pub enum WindowCell {
    Mean(f64),
    /// The run diverged before the window closed.
    Diverged,
    /// The run met its tolerance before the window; carries the final loss.
    Converged(f64),
    /// Too few steps were requested to reach the window.
    NotReached,
}

impl WindowCell {
    pub fn to_cell(&self) -> String {
        match self {
            Self::Mean(v) | Self::Converged(v) => fmt_f64(*v),
            Self::Diverged => "diverged".into(),
            Self::NotReached => String::new(),
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Self::Mean(v) | Self::Converged(v) => Some(*v),
            _ => None,
        }
    }
}

/// Iteration t applies the t-th update, so its loss is the one recorded on
/// row t − 1.
pub fn window_cell(rows: &[TrajectoryRow], diverged: bool, converged: bool, final_loss: f64, window: (usize, usize)) -> WindowCell {
    let (a, b) = window;
    let last = rows.last().map_or(0, |r| r.iter);
    let complete = last > b - 1 || (last == b - 1 && !diverged);
    if complete {
        let vals: Vec<f64> = rows[a - 1..b].iter().filter_map(|r| r.loss).collect();
        return WindowCell::Mean(vals.iter().sum::<f64>() / vals.len() as f64);
    }
    if diverged {
        WindowCell::Diverged
    } else if converged {
        WindowCell::Converged(final_loss)
    } else {
        WindowCell::NotReached
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub b0: f64,
    pub optimizer: OptimizerName,
    pub windows: [WindowCell; 3],
    pub final_lr: f64,
    pub diverged: bool,
}

pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    /// Per-point runs in grid order.
    pub runs: Vec<RunOutput>,
}

pub fn sweep_points(cfg: &ExperimentConfig) -> Result<Vec<(f64, OptimizerName)>> {
    let grid = cfg
        .b0_grid
        .as_ref()
        .ok_or_else(|| HarnessError::Config("sweep needs `b0_grid`".into()))?;
    Ok(grid.iter().flat_map(|&b0| cfg.optimizer.iter().map(move |&o| (b0, o))).collect())
}

/// Every (b₀, optimizer) pair, on up to `cfg.jobs` threads. Rows come back in
/// grid order whatever the scheduling.
pub fn sweep_b0(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    let points = sweep_points(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start {} jobs: {e}", cfg.jobs)))?;
    let runs: Vec<RunOutput> = pool.install(|| {
        points.par_iter().map(|&(b0, name)| run_point(cfg, name, b0, false)).collect::<Result<Vec<_>>>()
    })?;
    let rows = points
        .iter()
        .zip(&runs)
        .map(|(&(b0, optimizer), run)| {
            let f = &run.report.flags;
            let final_loss = run.report.final_state.loss;
            SweepRow {
                b0,
                optimizer,
                windows: WINDOWS.map(|w| window_cell(&run.rows, f.diverged, f.converged, final_loss, w)),
                final_lr: run.report.final_state.eff_lr,
                diverged: f.diverged,
            }
        })
        .collect();
    Ok(SweepOutput { rows, runs })
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        let w: Vec<String> = r.windows.iter().map(WindowCell::to_cell).collect();
        let _ = writeln!(s, "{},{},{},{}", fmt_f64(r.b0), r.optimizer, w.join(","), fmt_f64(r.final_lr));
    }
    s
}

/// File name for one sweep point's trajectory.
pub fn point_file(index: usize, b0: f64, name: OptimizerName) -> String {
    format!("{index:03}_{name}_b0_{}.csv", fmt_f64(b0))
}
