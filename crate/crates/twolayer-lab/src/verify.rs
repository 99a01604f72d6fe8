use numerics_core::{DenseMatrix, RngStream};
use stepsize_controllers::ControllerKind;

use crate::bounds::{condition2_threshold, dynamical_system_n, square_rule_drift_bound};
use crate::net::residual_of;
use crate::{BoundInputs, DataSet, NetTrajectory, Result, TrainMode, TwoLayerBounds, TwoLayerError, TwoLayerNet};

const REL_SLACK: f64 = 1e-12;

/// √(λ₀/2m)‖y−u‖ ≤ max_r‖∂L/∂w_r‖ ≤ √(n/m)‖y−u‖ at one iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichCheck {
    pub lower: f64,
    pub realized: f64,
    pub upper: f64,
    /// λ_min(H(k)) ≥ λ₀/2, the hypothesis of the lower side.
    pub applicable: bool,
    pub holds: bool,
}

pub fn sandwich_check(
    residual_sq: f64,
    max_grad_norm: f64,
    lambda_min_h: f64,
    lambda0: f64,
    n: usize,
    m: usize,
) -> SandwichCheck {
    let res = residual_sq.sqrt();
    let mf = m as f64;
    let lower = (lambda0 / (2.0 * mf)).sqrt() * res;
    let upper = (n as f64 / mf).sqrt() * res;
    let applicable = lambda_min_h >= lambda0 / 2.0;
    let holds = !applicable || (lower <= max_grad_norm * (1.0 + REL_SLACK) && max_grad_norm <= upper * (1.0 + REL_SLACK));
    SandwichCheck { lower, realized: max_grad_norm, upper, applicable, holds }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    /// Resampled ξ_k per frozen iterate.
    pub samples: usize,
    pub eta: f64,
    pub alpha: f64,
    pub lambda0: f64,
    /// The constant B of the stochastic condition.
    pub big_b: f64,
    /// Standard errors of slack on the empirical mean.
    pub se_slack: f64,
}

impl McConfig {
    pub fn threshold(&self, n: usize) -> f64 {
        condition2_threshold(n, self.alpha, self.eta, self.lambda0, self.big_b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOutcome {
    /// ‖y − u(k)‖²
    pub current: f64,
    /// Empirical mean of ‖y − u(k+1)‖² over ξ_k.
    pub mean: f64,
    pub std_err: f64,
    /// current + se_slack·std_err
    pub allowed: f64,
    pub samples: usize,
    pub b_k: f64,
    pub threshold: f64,
    pub above_threshold: bool,
    pub holds: bool,
}

/// ‖y − u‖² after one single-sample step on ξ with stepsize `lr`. Only
/// column ξ of the weights moves, so u is rebuilt from the pre-activations
/// with a rank-one correction.
fn residual_after_sample(
    net: &TwoLayerNet,
    pre: &DenseMatrix,
    gram: &DenseMatrix,
    data: &DataSet,
    e_xi: f64,
    xi: usize,
    lr: f64,
) -> f64 {
    let (m, n) = (pre.rows(), pre.cols());
    let scale = 1.0 / (m as f64).sqrt();
    let g = gram.row(xi);
    let mut u = vec![0.0; n];
    for r in 0..m {
        let row = pre.row(r);
        if row[xi] < 0.0 {
            // neuron r is off on x_ξ: its gradient vanishes
            let ar = net.a()[r];
            for (ui, &p) in u.iter_mut().zip(row) {
                *ui += ar * p.max(0.0);
            }
            continue;
        }
        let ar = net.a()[r];
        let shift = lr * scale * e_xi * ar;
        for ((ui, &p), &gi) in u.iter_mut().zip(row).zip(g) {
            *ui += ar * (p + shift * gi).max(0.0);
        }
    }
    u.iter().zip(&data.y).map(|(ui, yi)| (yi - ui * scale).powi(2)).sum()
}

/// Stochastic AdaLoss expected-decrease check at a frozen iterate: draws ξ_k
/// uniformly, forms b_{k+1}² = b_k² + α²√n(y_ξ − u_ξ)², steps with η/b_{k+1}
/// on ½(y_ξ − u_ξ)², and averages ‖y − u(k+1)‖².
pub fn condition2_monte_carlo(
    net: &TwoLayerNet,
    data: &DataSet,
    b_k: f64,
    cfg: &McConfig,
    stream: &mut RngStream,
) -> Result<McOutcome> {
    if cfg.samples < 2 || !(b_k > 0.0) {
        return Err(TwoLayerError::Parameter("need samples >= 2 and b_k > 0".into()));
    }
    let n = data.n();
    let pre = net.preactivations(data)?;
    let u = net.output_from_pre(&pre);
    let (loss, e) = residual_of(data, &u);
    let gram = data.x.outer_gram();
    let rn = (n as f64).sqrt();
    let mut values = Vec::with_capacity(cfg.samples);
    for _ in 0..cfg.samples {
        let xi = stream.index(n);
        let b1 = (b_k * b_k + cfg.alpha * cfg.alpha * rn * e[xi] * e[xi]).sqrt();
        values.push(residual_after_sample(net, &pre, &gram, data, e[xi], xi, cfg.eta / b1));
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let std_err = (var / k).sqrt();
    let current = 2.0 * loss;
    let threshold = cfg.threshold(n);
    let above_threshold = b_k > threshold;
    let allowed = current + cfg.se_slack * std_err;
    let holds = !above_threshold || mean <= allowed;
    Ok(McOutcome { current, mean, std_err, allowed, samples: cfg.samples, b_k, threshold, above_threshold, holds })
}

/// Runs b²_{j+1} = b²_j + γa_j for N steps and reports whether
/// min_{k<N} a_k ≤ √ε or b_N ≥ L.
pub fn dynamical_property_holds(b0: f64, level: f64, gamma: f64, eps: f64, signals: &[f64]) -> Result<bool> {
    let n = dynamical_system_n(b0, level, gamma, eps)? as usize;
    if signals.len() < n {
        return Err(TwoLayerError::Parameter(format!("need {n} signals, got {}", signals.len())));
    }
    if signals[..n].iter().any(|&a| !(a >= 0.0)) {
        return Err(TwoLayerError::Parameter("signals must be nonnegative".into()));
    }
    let b_sq = signals[..n].iter().fold(b0 * b0, |b, &a| b + gamma * a);
    let min_a = signals[..n].iter().copied().fold(f64::INFINITY, f64::min);
    Ok(min_a <= eps.sqrt() || b_sq.sqrt() >= level)
}

/// One row of the bound table: the bound as evaluated and the matching
/// realized value at the tightest point of the run.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: String,
    pub computed: f64,
    pub realized: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct SuiteInputs<'a> {
    pub trajectory: &'a NetTrajectory,
    pub bounds: &'a TwoLayerBounds,
    pub bound_inputs: &'a BoundInputs,
    /// λ_max(H(0)), standing in for C‖H^∞‖ in the crossing threshold.
    pub lambda_max_h0: f64,
    pub kind: ControllerKind,
    pub mode: TrainMode,
    pub mc: Option<&'a McOutcome>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SuiteReport {
    pub rows: Vec<CheckRow>,
}

impl SuiteReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Tracks the (computed, realized) pair with the smallest margin.
struct Tightest {
    best: Option<(f64, f64, f64)>,
    pass: bool,
}

impl Tightest {
    fn new() -> Self {
        Self { best: None, pass: true }
    }

    fn push(&mut self, computed: f64, realized: f64, holds: bool) {
        let margin = computed - realized;
        if self.best.map_or(true, |(m, _, _)| margin < m) {
            self.best = Some((margin, computed, realized));
        }
        self.pass &= holds;
    }

    fn row(self, name: &str) -> Option<CheckRow> {
        self.best.map(|(_, computed, realized)| CheckRow { name: name.into(), computed, realized, pass: self.pass })
    }
}

pub fn verify_suite(inp: &SuiteInputs) -> SuiteReport {
    let recs = &inp.trajectory.records;
    let bi = inp.bound_inputs;
    let (n, m) = (bi.n, bi.m);
    let mut rows = Vec::new();

    let mut upper = Tightest::new();
    let mut lower = Tightest::new();
    let mut by_grad = Tightest::new();
    for r in recs {
        let (Some(g), Some(lmin), Some(res_sq)) = (r.max_grad_norm, r.lambda_min_h, r.residual_sq) else { continue };
        let s = sandwich_check(res_sq, g, lmin, bi.lambda0, n, m);
        if !s.applicable {
            continue;
        }
        upper.push(s.upper, s.realized, s.realized <= s.upper * (1.0 + REL_SLACK));
        // lower side read as an upper bound on the residual
        lower.push(s.realized, s.lower, s.lower <= s.realized * (1.0 + REL_SLACK));
        let res = res_sq.sqrt();
        let rhs = (2.0 * m as f64 / bi.lambda0).sqrt() * g;
        by_grad.push(rhs, res, res <= rhs * (1.0 + REL_SLACK));
    }
    rows.extend(upper.row("sandwich_upper"));
    rows.extend(lower.row("sandwich_lower"));
    rows.extend(by_grad.row("residual_by_max_gradient"));

    // decrease with λ_min(H(k))/2 for λ₀C₁ and λ_max(H(k)) for C‖H^∞‖
    let mut contraction = Tightest::new();
    for w in recs.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let (Some(lmin), Some(lmax)) = (a.lambda_min_h, a.lambda_max_h) else { continue };
        let (Some(r0), Some(r1)) = (a.residual_sq, b.residual_sq) else { continue };
        let h = bi.eta / b.b;
        if h * lmax > 2.0 || r0 == 0.0 {
            continue;
        }
        let factor = 1.0 - h * lmin * (1.0 - h * lmax / 2.0);
        let ratio = r1 / r0;
        contraction.push(factor, ratio, ratio <= factor * (1.0 + 1e-9));
    }
    rows.extend(contraction.row("contraction_empirical"));

    let loss_rule = matches!(inp.kind, ControllerKind::AdaLoss | ControllerKind::SquareRuleLoss);
    if loss_rule && inp.mode == TrainMode::Deterministic {
        let threshold = bi.eta * inp.lambda_max_h0;
        let t0 = recs.iter().position(|r| r.b >= threshold);
        let pre_end = t0.unwrap_or(recs.len());
        let mut drift = Tightest::new();
        for k in 0..pre_end.min(recs.len().saturating_sub(1)) {
            let bound = square_rule_drift_bound(bi.eta, bi.alpha, m, k, inp.lambda_max_h0, bi.b0);
            let realized = recs[k + 1].max_drift;
            drift.push(bound, realized, realized <= bound);
        }
        rows.extend(drift.row("drift_pre_crossing"));

        if let Some((t0, res_sq)) = t0.and_then(|t| recs[t].residual_sq.map(|r| (t, r))) {
            let computed = inp.bounds.b_after_crossing(bi, recs[t0].b, res_sq);
            let realized = recs[t0..].iter().map(|r| r.b).fold(0.0, f64::max);
            rows.push(CheckRow { name: "b_sup_after_crossing".into(), computed, realized, pass: realized <= computed });
        }

        // a_k = ‖y − u(k)‖² in b²_{k+1} = b²_k + α²√n·a_k
        let big_n = inp.bounds.t0_dynamical as usize;
        if recs.len() > big_n {
            let crossed = recs[big_n].b >= inp.bounds.crossing_level;
            let small = recs[..big_n].iter().any(|r| r.residual_sq.is_some_and(|v| v <= bi.eps.sqrt()));
            let first = recs.iter().position(|r| r.b >= inp.bounds.crossing_level).unwrap_or(recs.len());
            rows.push(CheckRow {
                name: "crossing_within_t0".into(),
                computed: big_n as f64,
                realized: first as f64,
                pass: crossed || small,
            });
        }
    }

    if let Some(mc) = inp.mc {
        rows.push(CheckRow {
            name: "stochastic_expected_decrease".into(),
            computed: mc.allowed,
            realized: mc.mean,
            pass: mc.holds,
        });
    }
    SuiteReport { rows }
}
