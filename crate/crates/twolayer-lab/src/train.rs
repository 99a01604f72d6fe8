use numerics_core::{spectral_extremes, RngStream};
use stepsize_controllers::{ControllerKind, Optimizer};

use crate::gram::ActivationBits;
use crate::net::{max_row_norm, residual_of};
use crate::{gram, DataSet, Result, TwoLayerError, TwoLayerNet};

/// ‖y − u‖² beyond this flags divergence.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    Deterministic,
    /// ξ_k drawn uniformly with replacement, `batch_size` per step.
    Stochastic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub mode: TrainMode,
    pub steps: usize,
    pub batch_size: usize,
    /// Stop once ‖y − u‖² ≤ tol.
    pub tol: f64,
    /// Eigenvalues of H(k) every this many steps; 0 disables.
    pub eig_cadence: usize,
    /// Stochastic mode only: full-data loss every this many steps (and on
    /// the last row). Deterministic runs evaluate it every step.
    pub eval_cadence: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { mode: TrainMode::Deterministic, steps: 5000, batch_size: 1, tol: 1e-8, eig_cadence: 10, eval_cadence: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetStepRecord {
    pub iter: usize,
    /// ½‖y − u(k)‖², when the full data was evaluated at this step.
    pub loss: Option<f64>,
    /// ‖y − u(k)‖², alongside `loss`.
    pub residual_sq: Option<f64>,
    /// Stochastic mode: L_ξ = (1/2|ξ|)Σ_{i∈ξ}(y_i − u_i(k))² on the batch
    /// drawn at this iterate.
    pub batch_loss: Option<f64>,
    pub b: f64,
    /// Step size that produced this iterate (η/b₀ on the first row).
    pub eff_lr: f64,
    pub max_drift: f64,
    pub lambda_min_h: Option<f64>,
    pub lambda_max_h: Option<f64>,
    /// max_r ‖∂L/∂w_r‖ at this iterate; deterministic mode only.
    pub max_grad_norm: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NetTrajectory {
    pub records: Vec<NetStepRecord>,
    pub converged: bool,
    pub diverged: bool,
}

impl NetTrajectory {
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn final_record(&self) -> Option<&NetStepRecord> {
        self.records.last()
    }

    pub fn sup_b(&self) -> f64 {
        self.records.iter().map(|r| r.b).fold(0.0, f64::max)
    }
}

/// `res_sq` is ‖y − u‖² (deterministic) or mean_ξ (y_i − u_i)² (stochastic).
fn loss_signal(kind: ControllerKind, alpha: f64, n: usize, res_sq: f64, grad_sq: f64) -> f64 {
    let rn = (n as f64).sqrt();
    match kind {
        ControllerKind::AdaLoss | ControllerKind::SquareRuleLoss => alpha * alpha * rn * res_sq,
        ControllerKind::NormRuleLoss => alpha * rn * res_sq.sqrt(),
        ControllerKind::AdaGradNorm => grad_sq,
        ControllerKind::Constant | ControllerKind::DecaySqrt => 0.0,
    }
}

fn bad(residual_sq: f64) -> bool {
    !residual_sq.is_finite() || residual_sq > DIVERGENCE_THRESHOLD
}

/// Trains the first layer in place. `optimizer` carries its state across
/// calls so a run can be resumed.
///
/// Deterministic signals: α²√n‖y−u‖² (AdaLoss, SquareRule), α√n‖y−u‖
/// (NormRule), ‖∂L/∂W‖_F² (AdaGrad-Norm). Stochastic runs step on
/// L_ξ = (1/2|ξ|)Σ_{i∈ξ}(y_i − u_i)² and feed α²√n·mean_ξ(y_i − u_i)².
pub fn train(
    net: &mut TwoLayerNet,
    data: &DataSet,
    optimizer: &mut Optimizer,
    opts: &TrainOptions,
    stream: &mut RngStream,
) -> Result<NetTrajectory> {
    let n = data.n();
    if opts.steps == 0 || !(opts.tol >= 0.0) || opts.eval_cadence == 0 {
        return Err(TwoLayerError::Parameter("need steps >= 1, tol >= 0 and eval_cadence >= 1".into()));
    }
    let stochastic = opts.mode == TrainMode::Stochastic;
    if stochastic && !(1..=n).contains(&opts.batch_size) {
        return Err(TwoLayerError::Parameter(format!("batch size {} not in [1, n]", opts.batch_size)));
    }
    if let Optimizer::Adam(a) = optimizer {
        if a.m1.len() != net.m() * net.d() {
            return Err(TwoLayerError::Dimension("Adam state does not match m·d".into()));
        }
    }

    let mut traj = NetTrajectory::default();
    let mut eff_lr = optimizer.effective_stepsize();
    let mut batch = vec![0usize; opts.batch_size];
    let mut k = 0usize;
    loop {
        let last = k == opts.steps;
        let eig_now = opts.eig_cadence > 0 && k % opts.eig_cadence == 0;
        let eval_now = !stochastic || last || k % opts.eval_cadence == 0;
        let pre = if eval_now || eig_now { Some(net.preactivations(data)?) } else { None };
        let full = pre.as_ref().map(|p| residual_of(data, &net.output_from_pre(p)));
        let residual_sq = full.as_ref().filter(|_| eval_now).map(|(l, _)| 2.0 * l);

        let (lambda_min_h, lambda_max_h) = match (&pre, eig_now && !residual_sq.is_some_and(bad)) {
            (Some(p), true) => {
                let h = gram::empirical_from_bits(data, &ActivationBits::active(p));
                let (hi, lo) = spectral_extremes(&h)?;
                (Some(lo), Some(hi))
            }
            _ => (None, None),
        };

        // (gradient, signal residual) for the step out of this iterate
        let mut step = None;
        let mut batch_loss = None;
        if !stochastic {
            let (l, e) = full.as_ref().expect("deterministic runs evaluate every step");
            if !bad(2.0 * l) {
                step = Some((net.gradient_from_pre(pre.as_ref().unwrap(), data, e)?, 2.0 * l));
            }
        } else if !last {
            batch.iter_mut().for_each(|i| *i = stream.index(n));
            let sub = data.subset(&batch);
            let pre_b = net.preactivations(&sub)?;
            let (l_sum, e_b) = residual_of(&sub, &net.output_from_pre(&pre_b));
            let inv = 1.0 / opts.batch_size as f64;
            let mean_sq = 2.0 * l_sum * inv;
            batch_loss = Some(0.5 * mean_sq);
            let weights: Vec<f64> = e_b.iter().map(|e| inv * e).collect();
            if !bad(mean_sq) {
                step = Some((net.gradient_from_pre(&pre_b, &sub, &weights)?, mean_sq));
            }
        }

        traj.records.push(NetStepRecord {
            iter: k,
            loss: residual_sq.map(|r| 0.5 * r),
            residual_sq,
            batch_loss,
            b: optimizer.b(),
            eff_lr,
            max_drift: net.max_drift(),
            lambda_min_h,
            lambda_max_h,
            max_grad_norm: if stochastic { None } else { step.as_ref().map(|(g, _)| max_row_norm(g)) },
        });
        if residual_sq.is_some_and(bad) || batch_loss.is_some_and(|l| bad(2.0 * l)) {
            traj.diverged = true;
            break;
        }
        if residual_sq.is_some_and(|r| r <= opts.tol) {
            traj.converged = true;
            break;
        }
        if last {
            break;
        }
        let Some((grad, res_sq)) = step else { unreachable!("finite residual without a step") };

        match optimizer {
            Optimizer::Scalar(s) => {
                let grad_sq = grad.as_slice().iter().map(|g| g * g).sum();
                let signal = loss_signal(s.kind, s.alpha, n, res_sq, grad_sq);
                *s = s.accumulate_signal(signal)?;
                net.step(&grad, s.effective_stepsize());
            }
            Optimizer::Adam(a) => {
                let dir = a.step(grad.as_slice(), 0.5 * res_sq)?;
                net.apply(&dir);
            }
        }
        eff_lr = optimizer.effective_stepsize();
        k += 1;
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{gen_dataset, init_net};
    use numerics_core::DenseMatrix;
    use stepsize_controllers::{AdamKind, AdamState, ControllerState};

    fn scalar(kind: ControllerKind, b0: f64, eta: f64) -> Optimizer {
        Optimizer::Scalar(ControllerState::new(kind, b0, eta).unwrap())
    }

    fn all_optimizers(dim: usize) -> Vec<Optimizer> {
        let mut v: Vec<Optimizer> = [
            ControllerKind::AdaLoss,
            ControllerKind::AdaGradNorm,
            ControllerKind::SquareRuleLoss,
            ControllerKind::NormRuleLoss,
            ControllerKind::Constant,
            ControllerKind::DecaySqrt,
        ]
        .into_iter()
        .map(|k| scalar(k, 1.0, 0.1))
        .collect();
        for k in [AdamKind::Adam, AdamKind::AdamLoss, AdamKind::AdamSqrt] {
            v.push(Optimizer::Adam(AdamState::new(k, dim, 0.01).unwrap()));
        }
        v
    }

    #[test]
    fn zero_residual_is_a_fixed_point() {
        let mut data = gen_dataset(8, 3, 1.0, &mut RngStream::new(1)).unwrap();
        let net0 = init_net(30, 3, &mut RngStream::new(2)).unwrap();
        data.y = net0.forward(&data).unwrap();
        for mode in [TrainMode::Deterministic, TrainMode::Stochastic] {
            for mut opt in all_optimizers(90) {
                let mut net = net0.clone();
                let opts = TrainOptions { mode, steps: 5, tol: 0.0, batch_size: 2, ..Default::default() };
                let t = train(&mut net, &data, &mut opt, &opts, &mut RngStream::new(3)).unwrap();
                assert_eq!(net.w(), net0.w(), "{opt:?}");
                assert_eq!(t.records.len(), 1);
                assert!(t.converged);
            }
        }
    }

    #[test]
    fn all_optimizers_run_finite() {
        let data = gen_dataset(10, 4, 1.0, &mut RngStream::new(4)).unwrap();
        let net0 = init_net(60, 4, &mut RngStream::new(5)).unwrap();
        for mode in [TrainMode::Deterministic, TrainMode::Stochastic] {
            for mut opt in all_optimizers(240) {
                let mut net = net0.clone();
                let opts = TrainOptions { mode, steps: 20, tol: 1e-12, batch_size: 3, eig_cadence: 5, eval_cadence: 1 };
                let t = train(&mut net, &data, &mut opt, &opts, &mut RngStream::new(6)).unwrap();
                assert_eq!(t.records.len(), 21);
                assert!(t.records.iter().all(|r| r.loss.is_some_and(f64::is_finite)));
                assert!(t.records[5].lambda_min_h.is_some() && t.records[6].lambda_min_h.is_none());
                if opt.is_accumulating() {
                    assert!(t.records.windows(2).all(|w| w[1].b >= w[0].b));
                }
            }
        }
    }

    #[test]
    fn square_rule_signal_value() {
        // n = 1, u(0) = 1, y = 0: b₁² = b₀² + α²·1·1
        let data = DataSet::new(DenseMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap(), vec![0.0]).unwrap();
        let mut net = TwoLayerNet::from_parts(DenseMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap(), vec![1.0]).unwrap();
        let mut opt =
            Optimizer::Scalar(ControllerState::new(ControllerKind::SquareRuleLoss, 1.0, 0.5).unwrap().with_alpha(2.0).unwrap());
        let opts = TrainOptions { steps: 1, tol: 0.0, eig_cadence: 0, ..Default::default() };
        let t = train(&mut net, &data, &mut opt, &opts, &mut RngStream::new(0)).unwrap();
        assert!((t.records[1].b - 5f64.sqrt()).abs() < 1e-15);
        // w ← w − (0.5/√5)·(1, 0)
        assert!((net.w()[(0, 0)] - (1.0 - 0.5 / 5f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn gd_descends_at_small_step() {
        let data = gen_dataset(12, 6, 1.0, &mut RngStream::new(7)).unwrap();
        let mut net = init_net(500, 6, &mut RngStream::new(8)).unwrap();
        let mut opt = scalar(ControllerKind::Constant, 10.0, 1.0);
        let opts = TrainOptions { steps: 200, tol: 0.0, eig_cadence: 0, ..Default::default() };
        let t = train(&mut net, &data, &mut opt, &opts, &mut RngStream::new(0)).unwrap();
        assert!(t.records.windows(2).all(|w| w[1].residual_sq <= w[0].residual_sq));
        assert!(t.final_record().unwrap().max_drift > 0.0);
    }

    #[test]
    fn constant_with_huge_step_diverges() {
        let data = gen_dataset(12, 6, 1.0, &mut RngStream::new(7)).unwrap();
        let mut net = init_net(100, 6, &mut RngStream::new(8)).unwrap();
        let mut opt = scalar(ControllerKind::Constant, 1e-3, 1.0);
        let opts = TrainOptions { steps: 500, tol: 0.0, eig_cadence: 0, ..Default::default() };
        let t = train(&mut net, &data, &mut opt, &opts, &mut RngStream::new(0)).unwrap();
        assert!(t.diverged);
    }

    #[test]
    fn stochastic_full_loss_on_cadence() {
        let data = gen_dataset(30, 4, 1.0, &mut RngStream::new(4)).unwrap();
        let mut net = init_net(40, 4, &mut RngStream::new(5)).unwrap();
        let mut opt = scalar(ControllerKind::AdaLoss, 1.0, 1.0);
        let opts = TrainOptions {
            mode: TrainMode::Stochastic,
            steps: 25,
            batch_size: 5,
            tol: 0.0,
            eig_cadence: 0,
            eval_cadence: 10,
        };
        let t = train(&mut net, &data, &mut opt, &opts, &mut RngStream::new(1)).unwrap();
        let evaluated: Vec<usize> = t.records.iter().filter(|r| r.loss.is_some()).map(|r| r.iter).collect();
        assert_eq!(evaluated, vec![0, 10, 20, 25]);
        assert!(t.records[..25].iter().all(|r| r.batch_loss.is_some()));
        assert!(t.records[25].batch_loss.is_none());
    }

    #[test]
    fn batch_gradient_is_mean_of_samples() {
        // batch ξ = (i, i) gives the single-sample step on i
        let data = gen_dataset(5, 3, 1.0, &mut RngStream::new(8)).unwrap();
        let net = init_net(20, 3, &mut RngStream::new(9)).unwrap();
        let (_, e) = net.loss_and_residual(&data).unwrap();
        let single = data.subset(&[2]);
        let double = data.subset(&[2, 2]);
        let g1 = net.per_neuron_gradient(&single, &[e[2]]).unwrap();
        let pre = net.preactivations(&double).unwrap();
        let g2 = net.gradient_from_pre(&pre, &double, &[0.5 * e[2], 0.5 * e[2]]).unwrap();
        assert_eq!(g1.as_slice(), g2.as_slice());
    }

    #[test]
    fn seeded_runs_repeat() {
        let data = gen_dataset(10, 4, 1.0, &mut RngStream::new(4)).unwrap();
        let net0 = init_net(40, 4, &mut RngStream::new(5)).unwrap();
        let run = || {
            let mut net = net0.clone();
            let mut opt = scalar(ControllerKind::AdaLoss, 0.1, 1.0);
            let opts = TrainOptions { mode: TrainMode::Stochastic, steps: 50, ..Default::default() };
            train(&mut net, &data, &mut opt, &opts, &mut RngStream::new(11)).unwrap()
        };
        assert_eq!(run(), run());
    }
}
