use numerics_core::{norm_sq, RngStream};
use stepsize_controllers::{ControllerKind, Optimizer};

use crate::{LinRegError, LinRegProblem, Result};

/// ‖w − w*‖² beyond this flags divergence.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Deterministic,
    Stochastic,
}

/// Raw signal for the controller kind at `w`.
///
/// Deterministic: ‖Xᵀ(Xw−y)‖² (AdaGradNorm) or ‖Xw−y‖² (AdaLoss).
/// Stochastic: batch means of ‖x_ξ(x_ξᵀw−y_ξ)‖² or (x_ξᵀw−y_ξ)².
/// Kinds without a signal return 0.
pub fn linreg_signal(
    kind: ControllerKind,
    mode: Mode,
    problem: &LinRegProblem,
    w: &[f64],
    batch: &[usize],
) -> Result<f64> {
    if matches!(kind, ControllerKind::SquareRuleLoss | ControllerKind::NormRuleLoss) {
        return Err(LinRegError::Unsupported(format!("{kind:?}")));
    }
    if matches!(kind, ControllerKind::Constant | ControllerKind::DecaySqrt) {
        return Ok(0.0);
    }
    let grad_kind = kind == ControllerKind::AdaGradNorm;
    match mode {
        Mode::Deterministic => {
            let r = problem.residual(w);
            Ok(if grad_kind { norm_sq(&problem.x.t_matvec(&r)) } else { norm_sq(&r) })
        }
        Mode::Stochastic => {
            check_batch(problem, batch)?;
            let total: f64 = batch
                .iter()
                .map(|&i| {
                    let r = problem.sample_residual(i, w);
                    if grad_kind {
                        r * r * norm_sq(problem.x.row(i))
                    } else {
                        r * r
                    }
                })
                .sum();
            Ok(total / batch.len() as f64)
        }
    }
}

fn check_batch(problem: &LinRegProblem, batch: &[usize]) -> Result<()> {
    if batch.is_empty() {
        return Err(LinRegError::Parameter("empty batch".into()));
    }
    if let Some(&i) = batch.iter().find(|&&i| i >= problem.n()) {
        return Err(LinRegError::Index { index: i, n: problem.n() });
    }
    Ok(())
}

/// One row of a trajectory: the state at `w_iter` after `iter` updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub iter: usize,
    pub loss: f64,
    pub error: f64,
    pub b: f64,
    /// Stepsize that produced this iterate (η/b₀ on row 0).
    pub eff_lr: f64,
    /// ([Vᵀw]₁ − [Vᵀw*]₁)²
    pub hat_error_1: f64,
}

#[derive(Debug, Clone, Default)]
pub struct LinRegTrajectory {
    pub records: Vec<StepRecord>,
    /// `w_t` for every record, when requested.
    pub iterates: Vec<Vec<f64>>,
    pub converged: bool,
    pub diverged: bool,
}

impl LinRegTrajectory {
    /// Updates performed.
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.iter)
    }

    pub fn sup_b(&self) -> f64 {
        self.records.iter().map(|r| r.b).fold(f64::NEG_INFINITY, f64::max)
    }

    /// First index `t` with `b_t >= threshold`.
    pub fn first_b_at_least(&self, threshold: f64) -> Option<usize> {
        self.records.iter().find(|r| r.b >= threshold).map(|r| r.iter)
    }

    pub fn final_record(&self) -> Option<&StepRecord> {
        self.records.last()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub mode: Mode,
    pub steps: usize,
    pub batch_size: usize,
    pub tol: f64,
    pub keep_iterates: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { mode: Mode::Deterministic, steps: 5000, batch_size: 1, tol: 1e-8, keep_iterates: false }
    }
}

/// Iterate `w ← w − (η/b_{t+1})·g` with the signal folded into `b` first.
pub fn run_linreg(
    problem: &LinRegProblem,
    optimizer: &Optimizer,
    w0: &[f64],
    opts: &RunOptions,
    stream: &mut RngStream,
) -> Result<LinRegTrajectory> {
    if w0.len() != problem.d() {
        return Err(LinRegError::Parameter(format!("w0 has length {} != d = {}", w0.len(), problem.d())));
    }
    if !(opts.tol > 0.0) || opts.steps == 0 {
        return Err(LinRegError::Parameter("need tol > 0 and steps >= 1".into()));
    }
    if opts.mode == Mode::Stochastic && !(1..=problem.n()).contains(&opts.batch_size) {
        return Err(LinRegError::Parameter(format!("batch size {} not in [1, n]", opts.batch_size)));
    }
    if let Optimizer::Scalar(s) = optimizer {
        if matches!(s.kind, ControllerKind::SquareRuleLoss | ControllerKind::NormRuleLoss) {
            return Err(LinRegError::Unsupported(format!("{:?}", s.kind)));
        }
    }

    let mut opt = optimizer.clone();
    let mut w = w0.to_vec();
    let mut traj = LinRegTrajectory::default();
    let mut batch = Vec::with_capacity(opts.batch_size);
    let mut eff_lr = opt.effective_stepsize();
    let mut k = 0usize;
    loop {
        let error = problem.error(&w);
        let rec = StepRecord {
            iter: k,
            loss: problem.loss(&w),
            error,
            b: opt.b(),
            eff_lr,
            hat_error_1: problem.hat(&w)[0].powi(2),
        };
        traj.records.push(rec);
        if opts.keep_iterates {
            traj.iterates.push(w.clone());
        }
        if !error.is_finite() || error > DIVERGENCE_THRESHOLD {
            traj.diverged = true;
            break;
        }
        if error <= opts.tol {
            traj.converged = true;
            break;
        }
        if k == opts.steps {
            break;
        }

        let (grad, loss_value) = match opts.mode {
            Mode::Deterministic => {
                let r = problem.residual(&w);
                (problem.x.t_matvec(&r), 0.5 * norm_sq(&r))
            }
            Mode::Stochastic => {
                batch.clear();
                batch.extend((0..opts.batch_size).map(|_| stream.index(problem.n())));
                let mut g = vec![0.0; problem.d()];
                let mut sq = 0.0;
                for &i in &batch {
                    let r = problem.sample_residual(i, &w);
                    sq += r * r;
                    g.iter_mut().zip(problem.x.row(i)).for_each(|(a, x)| *a += r * x);
                }
                let inv = 1.0 / batch.len() as f64;
                g.iter_mut().for_each(|a| *a *= inv);
                (g, 0.5 * sq * inv)
            }
        };

        match &mut opt {
            Optimizer::Scalar(s) => {
                let raw = linreg_signal(s.kind, opts.mode, problem, &w, &batch)?;
                let signal = if s.kind == ControllerKind::AdaLoss { s.loss_signal(raw) } else { raw };
                *s = s.accumulate_signal(signal)?;
                let lr = s.effective_stepsize();
                w.iter_mut().zip(&grad).for_each(|(wi, gi)| *wi -= lr * gi);
            }
            Optimizer::Adam(a) => {
                let dir = a.step(&grad, loss_value)?;
                w.iter_mut().zip(&dir).for_each(|(wi, di)| *wi += di);
            }
        }
        eff_lr = opt.effective_stepsize();
        k += 1;
    }
    Ok(traj)
}

/// `(1 − ηλ_i/b_{t+1})² s_i`
pub fn hat_dynamics_step(s_i: f64, b_next: f64, eta: f64, lambda_i: f64) -> f64 {
    let f = 1.0 - eta * lambda_i / b_next;
    f * f * s_i
}
