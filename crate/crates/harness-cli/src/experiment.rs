use std::collections::BTreeMap;

use linreg_lab::{
    bound_b_limit, bound_crossing, bound_stochastic_n, bound_t, estimate_ruil, gen_problem, run_linreg,
    verify_inequalities, Inequality, LinRegProblem, LinRegTrajectory, Method, RuilKind, RunOptions,
};
use numerics_core::{eigenvalues_sym, RngStream};
use serde::Serialize;
use stepsize_controllers::{AdamKind, AdamState, ControllerKind, ControllerState, Optimizer};
use twolayer_lab::{
    bounds_and_constants, condition2_b, condition2_monte_carlo, gen_dataset, gram_info, init_net, train,
    verify_suite, BoundInputs, DataSet, McConfig, NetTrajectory, SuiteInputs, TrainMode, TrainOptions,
    TwoLayerBounds, TwoLayerNet,
};

use crate::config::{Conditioning, ExperimentConfig, OptimizerName, RunMode, Testbed};
use crate::output::{BoundRow, ComputedBound, FinalSummary, Flags, RunReport, TrajectoryRow};
use crate::{HarnessError, Result};

/// Substream indices under the run seed.
const STREAM_PROBLEM: u64 = 0;
const STREAM_NET: u64 = 1;
const STREAM_RUN: u64 = 2;
const STREAM_CHECKS: u64 = 3;

/// Relative slack on bound comparisons that are exact in real arithmetic.
const REL_SLACK: f64 = 1e-12;

pub struct RunOutput {
    pub report: RunReport,
    pub rows: Vec<TrajectoryRow>,
}

impl RunOutput {
    pub fn diverged(&self) -> bool {
        self.report.flags.diverged
    }
}

pub fn single_optimizer(cfg: &ExperimentConfig) -> Result<OptimizerName> {
    match cfg.optimizer.as_slice() {
        [one] => Ok(*one),
        _ => Err(HarnessError::Config("`optimizer` must name exactly one optimizer for this command".into())),
    }
}

pub fn build_optimizer(name: OptimizerName, b0: f64, cfg: &ExperimentConfig, dim: usize) -> Result<Optimizer> {
    let scalar = |kind: ControllerKind| -> Result<Optimizer> {
        let s = ControllerState::new(kind, b0, cfg.eta)?.with_alpha(cfg.alpha)?.with_offset(cfg.c)?.with_decay(cfg.c_s)?;
        Ok(Optimizer::Scalar(s))
    };
    let adam = |kind: AdamKind, eta_or_b: f64| -> Result<Optimizer> {
        let mut a = AdamState::new(kind, dim, eta_or_b)?.with_alpha(cfg.alpha)?;
        a.beta1 = cfg.beta1;
        a.beta2 = cfg.beta2;
        Ok(Optimizer::Adam(a))
    };
    match name {
        OptimizerName::AdaLoss => scalar(ControllerKind::AdaLoss),
        OptimizerName::AdaGradNorm => scalar(ControllerKind::AdaGradNorm),
        OptimizerName::SgdConst => scalar(ControllerKind::Constant),
        OptimizerName::SgdDecaySqrt => scalar(ControllerKind::DecaySqrt),
        OptimizerName::SquareRule => scalar(ControllerKind::SquareRuleLoss),
        OptimizerName::NormRule => scalar(ControllerKind::NormRuleLoss),
        OptimizerName::Adam => adam(AdamKind::Adam, cfg.eta),
        OptimizerName::AdamLoss => adam(AdamKind::AdamLoss, b0),
        OptimizerName::AdamSqrt => adam(AdamKind::AdamSqrt, b0),
    }
}

fn method_of(name: OptimizerName) -> Option<Method> {
    match name {
        OptimizerName::AdaLoss => Some(Method::AdaLoss),
        OptimizerName::AdaGradNorm => Some(Method::AdaGradNorm),
        _ => None,
    }
}

fn conditioning(c: Conditioning) -> linreg_lab::Conditioning {
    match c {
        Conditioning::Iid => linreg_lab::Conditioning::Iid,
        Conditioning::Correlated => linreg_lab::Conditioning::Correlated,
    }
}

pub fn linreg_problem(cfg: &ExperimentConfig) -> Result<LinRegProblem> {
    let root = RngStream::new(cfg.seed);
    Ok(gen_problem(cfg.n, cfg.d, conditioning(cfg.conditioning), &mut root.substream(STREAM_PROBLEM))?)
}

pub fn twolayer_setup(cfg: &ExperimentConfig) -> Result<(DataSet, TwoLayerNet)> {
    let m = cfg.m.ok_or_else(|| HarnessError::Config("missing required key `m`".into()))?;
    let root = RngStream::new(cfg.seed);
    let data = gen_dataset(cfg.n, cfg.d, cfg.label_bound, &mut root.substream(STREAM_PROBLEM))?;
    let net = init_net(m, cfg.d, &mut root.substream(STREAM_NET))?;
    Ok((data, net))
}

/// Runs the configured single optimizer at the configured b₀ with the full
/// bound table.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    run_point(cfg, single_optimizer(cfg)?, cfg.b0, true)
}

/// One training run. `checks = false` skips the bound table (used by sweeps).
pub fn run_point(cfg: &ExperimentConfig, name: OptimizerName, b0: f64, checks: bool) -> Result<RunOutput> {
    let mut echo = cfg.clone();
    echo.optimizer = vec![name];
    echo.b0 = b0;
    echo.b0_grid = None;
    match cfg.testbed {
        Testbed::Linreg => run_linreg_point(echo, name, checks),
        Testbed::Twolayer => run_twolayer_point(echo, name, checks),
    }
}

fn run_linreg_point(cfg: ExperimentConfig, name: OptimizerName, checks: bool) -> Result<RunOutput> {
    let problem = linreg_problem(&cfg)?;
    let root = RngStream::new(cfg.seed);
    let w0 = vec![0.0; cfg.d];
    let optimizer = build_optimizer(name, cfg.b0, &cfg, cfg.d)?;
    let mode = match cfg.mode {
        RunMode::Det => linreg_lab::Mode::Deterministic,
        RunMode::Stoch => linreg_lab::Mode::Stochastic,
    };
    let scalar = matches!(optimizer, Optimizer::Scalar(_));
    let opts = RunOptions {
        mode,
        steps: cfg.steps,
        batch_size: cfg.batch,
        tol: cfg.tol,
        keep_iterates: checks && scalar && cfg.mode == RunMode::Det,
    };
    let traj = run_linreg(&problem, &optimizer, &w0, &opts, &mut root.substream(STREAM_RUN))?;
    let rows: Vec<TrajectoryRow> = traj
        .records
        .iter()
        .map(|r| TrajectoryRow {
            iter: r.iter,
            loss: Some(r.loss),
            error: Some(r.error),
            b: r.b,
            eff_lr: r.eff_lr,
            ..Default::default()
        })
        .collect();
    let last = traj.final_record().expect("a run records its initial state");
    let final_state = FinalSummary {
        iterations: traj.iterations(),
        loss: last.loss,
        error: last.error,
        b: last.b,
        eff_lr: last.eff_lr,
        sup_b: traj.sup_b(),
    };
    let mut flags = Flags { diverged: traj.diverged, converged: traj.converged, ..Default::default() };
    flags.constants.insert("lambda_1".into(), problem.lambda_1());
    flags.constants.insert("lambda_n".into(), problem.lambda_n());
    flags.constants.insert("max_row_norm_sq".into(), problem.max_row_norm_sq());
    let bounds = if checks { linreg_bound_rows(&cfg, name, &problem, &w0, &traj, &root, &mut flags) } else { vec![] };
    Ok(RunOutput { report: RunReport { config: cfg, final_state, bounds, flags }, rows })
}

fn linreg_bound_rows(
    cfg: &ExperimentConfig,
    name: OptimizerName,
    problem: &LinRegProblem,
    w0: &[f64],
    traj: &LinRegTrajectory,
    root: &RngStream,
    flags: &mut Flags,
) -> Vec<BoundRow> {
    let mut rows = Vec::new();
    let iters = traj.iterations() as f64;
    let (eta, b0) = (cfg.eta, cfg.b0);
    let l1 = problem.lambda_1();
    let mut note = |what: &str, e: &dyn std::fmt::Display| flags.notes.push(format!("{what}: {e}"));

    match (method_of(name), cfg.mode) {
        (Some(method), RunMode::Det) => {
            match bound_t(problem, method, b0, eta, cfg.tol, w0) {
                Ok(tb) => {
                    let pass = !traj.diverged && if traj.converged { iters <= tb.t_total } else { tb.t_total > iters };
                    rows.push(BoundRow { name: "T_total".into(), computed: tb.t_total, realized: iters, pass });
                }
                Err(e) => note("T_total", &e),
            }
            if 2.0 * b0 < eta * l1 {
                match bound_crossing(problem, b0, eta, w0) {
                    Ok((n_agn, n_al)) => {
                        let computed = if method == Method::AdaGradNorm { n_agn } else { n_al };
                        let (realized, pass) = match traj.first_b_at_least(eta * l1 / 2.0) {
                            Some(k) => (k as f64, k as f64 <= computed),
                            None => (iters, traj.converged || iters < computed),
                        };
                        rows.push(BoundRow { name: "crossing_N".into(), computed, realized, pass });
                    }
                    Err(e) => note("crossing_N", &e),
                }
            }
            match bound_b_limit(problem, b0, eta, w0, method) {
                Ok(lim) if lim.hypothesis_holds => {
                    let sup = traj.sup_b();
                    let pass = sup <= lim.value * (1.0 + REL_SLACK);
                    rows.push(BoundRow { name: "b_limit".into(), computed: lim.value, realized: sup, pass });
                }
                Ok(_) => {}
                Err(e) => note("b_limit", &e),
            }
        }
        (Some(method), RunMode::Stoch) => {
            let kind = if method == Method::AdaLoss { RuilKind::Loss } else { RuilKind::Gradient };
            let lambda1 = problem.max_row_norm_sq();
            let mut stream = root.substream(STREAM_CHECKS);
            let est = estimate_ruil(problem, cfg.tol, kind, cfg.ruil_probes, &mut stream);
            match est.and_then(|e| bound_stochastic_n(e.mu, e.gamma, cfg.tol, b0, eta, lambda1, None)) {
                Ok(sn) => {
                    let computed = sn.n as f64;
                    let hit = traj.records.iter().find(|r| r.b > eta * lambda1 || r.error <= cfg.tol);
                    let (realized, pass) = match hit {
                        Some(r) => (r.iter as f64, r.iter as f64 <= computed),
                        None => (iters, iters < computed),
                    };
                    rows.push(BoundRow { name: "stochastic_N".into(), computed, realized, pass });
                }
                Err(e) => note("stochastic_N", &e),
            }
        }
        (None, _) => {}
    }

    if !traj.iterates.is_empty() {
        match verify_inequalities(problem, traj) {
            Ok(report) => {
                for (ineq, label) in [
                    (Inequality::PredictionDescent, "prediction_descent"),
                    (Inequality::Contraction, "contraction"),
                    (Inequality::Mixed, "mixed"),
                ] {
                    let checks: Vec<_> = report.checks.iter().filter(|c| c.inequality == ineq).collect();
                    let Some(tight) = checks.iter().min_by(|a, b| (a.rhs - a.lhs).total_cmp(&(b.rhs - b.lhs))) else {
                        continue;
                    };
                    let pass = checks.iter().all(|c| c.holds);
                    rows.push(BoundRow { name: label.into(), computed: tight.rhs, realized: tight.lhs, pass });
                }
            }
            Err(e) => note("inequalities", &e),
        }
    }
    rows
}

fn run_twolayer_point(cfg: ExperimentConfig, name: OptimizerName, checks: bool) -> Result<RunOutput> {
    let (data, mut net) = twolayer_setup(&cfg)?;
    let root = RngStream::new(cfg.seed);
    let m = net.m();
    let info0 = if checks { Some(gram_info(&net, &data, None)?) } else { None };
    let mut optimizer = build_optimizer(name, cfg.b0, &cfg, m * cfg.d)?;
    let mode = match cfg.mode {
        RunMode::Det => TrainMode::Deterministic,
        RunMode::Stoch => TrainMode::Stochastic,
    };
    let opts = TrainOptions {
        mode,
        steps: cfg.steps,
        batch_size: cfg.batch,
        tol: cfg.tol,
        eig_cadence: cfg.eig_cadence,
        eval_cadence: cfg.eval_cadence,
    };
    let traj = train(&mut net, &data, &mut optimizer, &opts, &mut root.substream(STREAM_RUN))?;
    let rows: Vec<TrajectoryRow> = traj
        .records
        .iter()
        .map(|r| TrajectoryRow {
            iter: r.iter,
            loss: if mode == TrainMode::Deterministic { r.loss } else { r.batch_loss },
            error: r.residual_sq,
            b: r.b,
            eff_lr: r.eff_lr,
            max_drift: Some(r.max_drift),
            lambda_min_h: r.lambda_min_h,
            lambda_max_h: r.lambda_max_h,
        })
        .collect();
    let last = traj.final_record().expect("a run records its initial state");
    let error = last.residual_sq.unwrap_or(f64::NAN);
    let final_state = FinalSummary {
        iterations: traj.iterations(),
        loss: 0.5 * error,
        error,
        b: last.b,
        eff_lr: last.eff_lr,
        sup_b: traj.sup_b(),
    };
    let mut flags = Flags { diverged: traj.diverged, converged: traj.converged, ..Default::default() };
    let mut bounds = Vec::new();
    if let Some(info) = info0 {
        flags.constants.insert("lambda0".into(), info.lambda0);
        flags.constants.insert("h_inf_norm".into(), info.h_inf_norm);
        flags.constants.insert("lambda_max_H0".into(), info.lambda_max);
        flags.constants.insert("lambda_min_H0".into(), info.lambda_min);
        let residual0 = traj.records[0].residual_sq.unwrap_or(f64::NAN).sqrt();
        let bi = twolayer_bound_inputs(&cfg, m, info.lambda0, info.h_inf_norm, residual0);
        match bounds_and_constants(&bi) {
            Ok(tb) => {
                insert_twolayer_constants(&mut flags.constants, &tb);
                bounds = twolayer_bound_rows(&cfg, optimizer_kind(&optimizer), &bi, &tb, info.lambda_max, &traj, &net, &data, &root, &mut flags);
            }
            Err(e) => flags.notes.push(format!("constants: {e}")),
        }
    }
    Ok(RunOutput { report: RunReport { config: cfg, final_state, bounds, flags }, rows })
}

fn optimizer_kind(opt: &Optimizer) -> Option<ControllerKind> {
    match opt {
        Optimizer::Scalar(s) => Some(s.kind),
        Optimizer::Adam(_) => None,
    }
}

fn twolayer_bound_inputs(cfg: &ExperimentConfig, m: usize, lambda0: f64, h_inf_norm: f64, residual0: f64) -> BoundInputs {
    BoundInputs {
        n: cfg.n,
        m,
        lambda0,
        h_inf_norm,
        delta: cfg.delta,
        eta: cfg.eta,
        alpha: cfg.alpha,
        b0: cfg.b0,
        residual0,
        c: cfg.radius_c,
        eps: cfg.tol,
        residual_t0: None,
    }
}

fn insert_twolayer_constants(map: &mut BTreeMap<String, f64>, tb: &TwoLayerBounds) {
    for (k, v) in [
        ("R", tb.r),
        ("R_prime", tb.r_prime),
        ("R_hat", tb.r_hat),
        ("R_tilde", tb.r_tilde),
        ("C", tb.c),
        ("C1", tb.c1),
        ("delta1", tb.delta1),
        ("C2", tb.c2),
        ("crossing_level", tb.crossing_level),
        ("T0", tb.t0_dynamical as f64),
        ("residual_T0_sq_bound", tb.residual_t0_sq_bound),
        ("b_inf", tb.b_inf),
        ("b_bar_inf", tb.b_bar_inf),
    ] {
        map.insert(k.into(), v);
    }
}

#[allow(clippy::too_many_arguments)]
fn twolayer_bound_rows(
    cfg: &ExperimentConfig,
    kind: Option<ControllerKind>,
    bi: &BoundInputs,
    tb: &TwoLayerBounds,
    lambda_max_h0: f64,
    traj: &NetTrajectory,
    net: &TwoLayerNet,
    data: &DataSet,
    root: &RngStream,
    flags: &mut Flags,
) -> Vec<BoundRow> {
    let Some(kind) = kind else {
        flags.notes.push("bound suite skipped: it assumes a scalar step size".into());
        return vec![];
    };
    let mode = match cfg.mode {
        RunMode::Det => TrainMode::Deterministic,
        RunMode::Stoch => TrainMode::Stochastic,
    };
    let mc = if mode == TrainMode::Stochastic && kind == ControllerKind::AdaLoss && !traj.diverged {
        let last_b = traj.final_record().map_or(cfg.b0, |r| r.b);
        let mc_cfg = McConfig {
            samples: cfg.mc_samples,
            eta: cfg.eta,
            alpha: cfg.alpha,
            lambda0: bi.lambda0,
            big_b: condition2_b(cfg.n, bi.lambda0, cfg.delta, tb.r),
            se_slack: 3.0,
        };
        match condition2_monte_carlo(net, data, last_b, &mc_cfg, &mut root.substream(STREAM_CHECKS)) {
            Ok(out) => {
                if !out.above_threshold {
                    flags.notes.push(format!(
                        "expected-decrease check is vacuous: b = {} is below the threshold {}",
                        out.b_k, out.threshold
                    ));
                }
                Some(out)
            }
            Err(e) => {
                flags.notes.push(format!("expected decrease: {e}"));
                None
            }
        }
    } else {
        None
    };
    let inputs = SuiteInputs { trajectory: traj, bounds: tb, bound_inputs: bi, lambda_max_h0, kind, mode, mc: mc.as_ref() };
    verify_suite(&inputs)
        .rows
        .into_iter()
        .map(|r| BoundRow { name: r.name, computed: r.computed, realized: r.realized, pass: r.pass })
        .collect()
}

/// Bound values from the configuration alone, with no training.
pub fn verify_only(cfg: &ExperimentConfig) -> Result<Vec<ComputedBound>> {
    let name = single_optimizer(cfg)?;
    let mut out = Vec::new();
    let mut push = |n: &str, v: f64| out.push(ComputedBound { name: n.into(), computed: v });
    match cfg.testbed {
        Testbed::Linreg => {
            let problem = linreg_problem(cfg)?;
            let w0 = vec![0.0; cfg.d];
            let method = method_of(name).ok_or_else(|| {
                HarnessError::Config(format!("no closed-form bounds for optimizer `{name}` on linreg"))
            })?;
            let l1 = problem.lambda_1();
            push("lambda_1", l1);
            push("lambda_n", problem.lambda_n());
            match cfg.mode {
                RunMode::Det => {
                    let tb = bound_t(&problem, method, cfg.b0, cfg.eta, cfg.tol, &w0)?;
                    push("T_total", tb.t_total);
                    if 2.0 * cfg.b0 < cfg.eta * l1 {
                        let (n_agn, n_al) = bound_crossing(&problem, cfg.b0, cfg.eta, &w0)?;
                        push("crossing_N", if method == Method::AdaGradNorm { n_agn } else { n_al });
                    }
                    let lim = bound_b_limit(&problem, cfg.b0, cfg.eta, &w0, method)?;
                    if lim.hypothesis_holds {
                        push("b_limit", lim.value);
                    }
                }
                RunMode::Stoch => {
                    let kind = if method == Method::AdaLoss { RuilKind::Loss } else { RuilKind::Gradient };
                    let root = RngStream::new(cfg.seed);
                    let est = estimate_ruil(&problem, cfg.tol, kind, cfg.ruil_probes, &mut root.substream(STREAM_CHECKS))?;
                    let lambda1 = problem.max_row_norm_sq();
                    let sn = bound_stochastic_n(est.mu, est.gamma, cfg.tol, cfg.b0, cfg.eta, lambda1, None)?;
                    push("ruil_mu", est.mu);
                    push("ruil_gamma", est.gamma);
                    push("stochastic_N", sn.n as f64);
                }
            }
        }
        Testbed::Twolayer => {
            let (data, net) = twolayer_setup(cfg)?;
            let info = gram_info(&net, &data, None)?;
            let (loss, _) = net.loss_and_residual(&data)?;
            let bi = twolayer_bound_inputs(cfg, net.m(), info.lambda0, info.h_inf_norm, (2.0 * loss).sqrt());
            let tb = bounds_and_constants(&bi)?;
            push("lambda0", info.lambda0);
            push("h_inf_norm", info.h_inf_norm);
            push("lambda_max_H0", info.lambda_max);
            push("lambda_min_H0", info.lambda_min);
            let mut constants = BTreeMap::new();
            insert_twolayer_constants(&mut constants, &tb);
            for (k, v) in constants {
                push(&k, v);
            }
            let big_b = condition2_b(cfg.n, info.lambda0, cfg.delta, tb.r);
            push("condition2_threshold", twolayer_lab::condition2_threshold(cfg.n, cfg.alpha, cfg.eta, info.lambda0, big_b));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct GramReport {
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub seed: u64,
    pub lambda0: f64,
    pub h_inf_norm: f64,
    pub lambda_max_h0: f64,
    pub lambda_min_h0: f64,
    /// Ascending.
    pub h_inf_eigenvalues: Vec<f64>,
    pub h0_eigenvalues: Vec<f64>,
}

pub fn gram_report(cfg: &ExperimentConfig) -> Result<GramReport> {
    if cfg.testbed != Testbed::Twolayer {
        return Err(HarnessError::Config("`gram` needs testbed = twolayer".into()));
    }
    let (data, net) = twolayer_setup(cfg)?;
    let info = gram_info(&net, &data, None)?;
    let mut h_inf_eigenvalues = eigenvalues_sym(&info.h_inf)?;
    let mut h0_eigenvalues = eigenvalues_sym(&info.h_k)?;
    h_inf_eigenvalues.sort_by(f64::total_cmp);
    h0_eigenvalues.sort_by(f64::total_cmp);
    Ok(GramReport {
        n: cfg.n,
        d: cfg.d,
        m: net.m(),
        seed: cfg.seed,
        lambda0: info.lambda0,
        h_inf_norm: info.h_inf_norm,
        lambda_max_h0: info.lambda_max,
        lambda_min_h0: info.lambda_min,
        h_inf_eigenvalues,
        h0_eigenvalues,
    })
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum ProblemFile {
    Linreg {
        testbed: Testbed,
        seed: u64,
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        w_star: Vec<f64>,
        lambda_1: f64,
        lambda_n: f64,
    },
    Twolayer {
        testbed: Testbed,
        seed: u64,
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        w0: Vec<Vec<f64>>,
        a: Vec<f64>,
    },
}

fn rows_of(m: &numerics_core::DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

pub fn gen_problem_file(cfg: &ExperimentConfig) -> Result<ProblemFile> {
    Ok(match cfg.testbed {
        Testbed::Linreg => {
            let p = linreg_problem(cfg)?;
            ProblemFile::Linreg {
                testbed: Testbed::Linreg,
                seed: cfg.seed,
                x: rows_of(&p.x),
                y: p.y.clone(),
                w_star: p.w_star.clone(),
                lambda_1: p.lambda_1(),
                lambda_n: p.lambda_n(),
            }
        }
        Testbed::Twolayer => {
            let (data, net) = twolayer_setup(cfg)?;
            ProblemFile::Twolayer {
                testbed: Testbed::Twolayer,
                seed: cfg.seed,
                x: rows_of(&data.x),
                y: data.y.clone(),
                w0: rows_of(net.w0()),
                a: net.a().to_vec(),
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn cfg(pairs: &[(&str, &str)]) -> ExperimentConfig {
        let owned: Vec<(&str, String)> = pairs.iter().map(|(k, v)| (*k, v.to_string())).collect();
        parse_config(None, &owned).unwrap()
    }

    #[test]
    fn linreg_adagradnorm_meets_its_iteration_bound() {
        let c = cfg(&[("testbed", "linreg"), ("optimizer", "adagradnorm"), ("n", "200"), ("d", "10"), ("b0", "10")]);
        let out = run_experiment(&c).unwrap();
        assert!(out.report.flags.converged);
        let t = out.report.bounds.iter().find(|b| b.name == "T_total").unwrap();
        assert!(t.computed >= out.report.final_state.iterations as f64);
        assert!(out.report.all_pass(), "{:?}", out.report.bounds);
        for name in ["prediction_descent", "contraction", "mixed"] {
            assert!(out.report.bounds.iter().any(|b| b.name == name), "{name}");
        }
        // above ηλ̄₁ the b-limit row appears
        let b0 = format!("{}", 2.0 * out.report.flags.constants["lambda_1"]);
        let c = cfg(&[("testbed", "linreg"), ("optimizer", "adagradnorm"), ("n", "200"), ("d", "10"), ("b0", &b0)]);
        let out = run_experiment(&c).unwrap();
        assert!(out.report.bounds.iter().any(|b| b.name == "b_limit"));
        assert!(out.report.all_pass(), "{:?}", out.report.bounds);
    }

    #[test]
    fn bound_rows_reproducible_from_echoed_config() {
        let c = cfg(&[("testbed", "linreg"), ("optimizer", "adaloss"), ("n", "100"), ("d", "5"), ("b0", "0.01")]);
        let out = run_experiment(&c).unwrap();
        let echo = &out.report.config;
        let p = linreg_problem(echo).unwrap();
        let w0 = vec![0.0; echo.d];
        let tb = bound_t(&p, Method::AdaLoss, echo.b0, echo.eta, echo.tol, &w0).unwrap();
        let row = out.report.bounds.iter().find(|b| b.name == "T_total").unwrap();
        assert_eq!(row.computed, tb.t_total);
        let (_, n_al) = bound_crossing(&p, echo.b0, echo.eta, &w0).unwrap();
        let row = out.report.bounds.iter().find(|b| b.name == "crossing_N").unwrap();
        assert_eq!(row.computed, n_al);
        assert!(out.report.all_pass(), "{:?}", out.report.bounds);
    }

    #[test]
    fn square_rule_rejected_on_linreg() {
        let c = cfg(&[("testbed", "linreg"), ("optimizer", "squarerule"), ("n", "20"), ("d", "2")]);
        assert!(run_experiment(&c).is_err());
    }

    #[test]
    fn twolayer_run_carries_suite_rows() {
        let c = cfg(&[
            ("testbed", "twolayer"),
            ("optimizer", "adaloss"),
            ("n", "10"),
            ("d", "5"),
            ("m", "400"),
            ("b0", "0.1"),
            ("steps", "200"),
            ("tol", "1e-6"),
        ]);
        let out = run_experiment(&c).unwrap();
        assert!(!out.diverged());
        let names: Vec<_> = out.report.bounds.iter().map(|b| b.name.as_str()).collect();
        assert!(names.contains(&"sandwich_upper") && names.contains(&"drift_pre_crossing"), "{names:?}");
        assert!(out.report.all_pass(), "{:?}", out.report.bounds);
        assert!(out.report.flags.constants.contains_key("T0"));
        // eigenvalue cells only on cadence rows
        assert!(out.rows[0].lambda_max_h.is_some());
        assert!(out.rows[1].lambda_max_h.is_none());
    }

    #[test]
    fn stochastic_adaloss_gets_expected_decrease_row() {
        let c = cfg(&[
            ("testbed", "twolayer"),
            ("optimizer", "adaloss"),
            ("mode", "stoch"),
            ("n", "10"),
            ("d", "5"),
            ("m", "200"),
            ("steps", "50"),
            ("eval_cadence", "10"),
            ("mc_samples", "50"),
        ]);
        let out = run_experiment(&c).unwrap();
        assert!(out.report.bounds.iter().any(|b| b.name == "stochastic_expected_decrease"));
        assert!(out.rows[0].loss.is_some() && out.rows[1].error.is_none());
    }

    #[test]
    fn verify_lists_bounds_without_training() {
        let c = cfg(&[("testbed", "linreg"), ("optimizer", "adagradnorm"), ("n", "50"), ("d", "4"), ("b0", "0.01")]);
        let rows = verify_only(&c).unwrap();
        assert!(rows.iter().any(|r| r.name == "T_total"));
        let c = cfg(&[("testbed", "twolayer"), ("optimizer", "adaloss"), ("n", "10"), ("d", "4"), ("m", "50")]);
        let rows = verify_only(&c).unwrap();
        assert!(rows.iter().any(|r| r.name == "C1"));
    }
}
