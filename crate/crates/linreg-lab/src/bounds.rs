use numerics_core::norm_sq;

use crate::{LinRegError, LinRegProblem, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    AdaGradNorm,
    AdaLoss,
}

/// Initialisation regime: (a) `b₀ ≥ ηλ̄₁/2`, (b) otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitCase {
    A,
    B,
}

/// Closed-form iteration bounds. In case (a) `t1..t3` are T₁, T₂, T₃; in
/// case (b) they are T̄₁, T̄₂, T̄₃ and `s` is the crossing allowance.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryBounds {
    pub method: Method,
    pub case: InitCase,
    /// Iterations after which ‖w − w*‖² ≤ ε is guaranteed (may be +∞).
    pub t_total: f64,
    /// The ceiling expression without the crossing allowance.
    pub t_main: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub s: f64,
    pub delta_s: Option<f64>,
    /// The indicator in T̄₁ is taken as 1 unless a realized `b` is supplied.
    pub indicator_assumed: bool,
    pub n_crossing: Option<f64>,
    pub n_crossing_adaloss: Option<f64>,
    pub b_limit: f64,
}

struct Stats {
    l1: f64,
    ln: f64,
    d0: f64,
    xd: f64,
    xxd: f64,
    s1: f64,
}

fn stats(problem: &LinRegProblem, w0: &[f64]) -> Result<Stats> {
    if w0.len() != problem.d() {
        return Err(LinRegError::Parameter(format!("w0 has length {} != d = {}", w0.len(), problem.d())));
    }
    let delta = problem.delta(w0);
    let xd_vec = problem.x.matvec(&delta);
    let xxd_vec = problem.x.t_matvec(&xd_vec);
    let hat = problem.spectral.to_eigenbasis(&delta);
    Ok(Stats {
        l1: problem.lambda_1(),
        ln: problem.lambda_n(),
        d0: norm_sq(&delta),
        xd: norm_sq(&xd_vec),
        xxd: norm_sq(&xxd_vec),
        s1: hat[0] * hat[0],
    })
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(LinRegError::Parameter(format!("{name} must be positive, got {v}")))
    }
}

fn ceil_plus_one(x: f64) -> f64 {
    x.ceil() + 1.0
}

fn in_open(x: f64, lo: f64, hi: f64) -> bool {
    x > lo && x < hi
}

/// δ_s from the top-eigendirection gap s₁ = ([Vᵀw₀]₁ − [Vᵀw*]₁)².
fn delta_s(eta: f64, b0: f64, st: &Stats) -> f64 {
    let num = eta * eta * (st.l1 + st.ln).powi(4) * (1.0 + b0 * b0 / st.s1);
    let gap = eta * st.l1 - (b0 * b0 + st.s1).sqrt();
    num / (4.0 * st.l1 * (st.l1 - st.ln).powi(2) * gap * gap)
}

fn crossing_raw(eta: f64, b0: f64, l1: f64, s1: f64) -> (f64, f64) {
    let top = (eta * l1).powi(2) - 4.0 * b0 * b0;
    let n = (1.0 + top / (eta * eta * l1 * l1)).ln() / (1.0 + 4.0 * s1 / (eta * eta)).ln() + 1.0;
    let n_tilde = (1.0 + top / (eta * eta * l1)).ln() / (1.0 + 4.0 * s1 / (eta * eta * l1)).ln() + 1.0;
    (n, n_tilde)
}

/// Iterations for deterministic AdaGrad-Norm / AdaLoss to reach ‖w − w*‖² ≤ ε.
/// The realized-`b` indicator in case (b) is taken as 1.
pub fn bound_t(
    problem: &LinRegProblem,
    method: Method,
    b0: f64,
    eta: f64,
    eps: f64,
    w0: &[f64],
) -> Result<TheoryBounds> {
    check_positive("b0", b0)?;
    check_positive("eta", eta)?;
    check_positive("eps", eps)?;
    let st = stats(problem, w0)?;
    let (l1, ln) = (st.l1, st.ln);
    let half = eta * l1 / 2.0;
    let upper = eta * (l1 + ln) / 2.0;
    let b_limit = bound_b_limit(problem, b0, eta, w0, method)?.value;

    if b0 >= half {
        let (t1, t2, t3) = match method {
            Method::AdaGradNorm => {
                let q = b0 * b0 + st.xxd;
                let root = q.sqrt();
                let t1 = if in_open(root, half, upper) { q / (2.0 * root - eta * l1) } else { 0.0 };
                (t1, eta * (l1 + ln) / 2.0, l1 + st.xd / (eta * eta))
            }
            Method::AdaLoss => {
                let q = b0 * b0 + st.xd;
                let root = q.sqrt();
                let gated = if in_open(root, half, upper) { q / (2.0 * root - eta * l1) } else { 0.0 };
                let t2 = (l1 + ln) / 2.0;
                (gated.max(t2), t2, l1 + st.d0 / (eta * eta))
            }
        };
        let t_main = ceil_plus_one(t1.max(t2).max(t3) / ln * (st.d0 / eps).ln());
        return Ok(TheoryBounds {
            method,
            case: InitCase::A,
            t_total: t_main,
            t_main,
            t1,
            t2,
            t3,
            s: 0.0,
            delta_s: None,
            indicator_assumed: false,
            n_crossing: None,
            n_crossing_adaloss: None,
            b_limit,
        });
    }

    if st.s1 == 0.0 {
        return Err(LinRegError::Degenerate("w0 has no component along the top eigenvector".into()));
    }
    let ds = delta_s(eta, b0, &st);
    let log_gap = (eta * l1 / (2.0 * b0)).ln();
    let log_gap2 = (eta * eta * l1 / (2.0 * b0)).ln();
    let d_bar = st.d0 + eta * eta * log_gap;
    let top = (eta * l1).powi(2) - 4.0 * b0 * b0;
    let (t1, t2, t3, s) = match method {
        Method::AdaGradNorm => {
            let s = 2.0 * (1.0 + top / (eta * eta * l1 * l1)).ln() / (1.0 + 4.0 * st.s1 / (eta * eta)).ln();
            let t1 = (eta * ln + 5.0 * eta * l1) * (ds + 1.0);
            (t1, (l1 + ln) / 2.0, l1 + st.xd / (eta * eta) + l1 / eta * log_gap2, s)
        }
        Method::AdaLoss => {
            let s = 2.0 * (1.0 + top / (eta * eta * l1 * l1)).ln() / (1.0 + 4.0 * st.s1 / (eta * eta * l1)).ln();
            let t2 = ((eta * ln + 5.0 * eta * l1) * (ds + 1.0)).max((l1 + ln) / 2.0);
            (t2, (l1 + ln) / 2.0, l1 + st.d0 / (eta * eta) + l1 / eta * log_gap2, s)
        }
    };
    let t_main = ceil_plus_one(t1.max(t2).max(t3) / ln * (d_bar / eps).ln());
    let (n, n_tilde) = crossing_raw(eta, b0, l1, st.s1);
    Ok(TheoryBounds {
        method,
        case: InitCase::B,
        t_total: t_main + s.ceil(),
        t_main,
        t1,
        t2,
        t3,
        s,
        delta_s: Some(ds),
        indicator_assumed: true,
        n_crossing: Some(n),
        n_crossing_adaloss: Some(n_tilde),
        b_limit,
    })
}

/// Upper bounds on the first index with `b_t ≥ ηλ̄₁/2` for AdaGrad-Norm (N)
/// and AdaLoss (Ñ), starting from `2b₀ < ηλ̄₁`.
pub fn bound_crossing(problem: &LinRegProblem, b0: f64, eta: f64, w0: &[f64]) -> Result<(f64, f64)> {
    check_positive("b0", b0)?;
    check_positive("eta", eta)?;
    let st = stats(problem, w0)?;
    if 2.0 * b0 >= eta * st.l1 {
        return Err(LinRegError::NotApplicable(format!("2b0 = {} >= ηλ̄₁ = {}", 2.0 * b0, eta * st.l1)));
    }
    if st.s1 == 0.0 {
        return Err(LinRegError::Degenerate("w0 has no component along the top eigenvector".into()));
    }
    Ok(crossing_raw(eta, b0, st.l1, st.s1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BLimit {
    pub value: f64,
    /// Whether `b₀ ≥ ηλ̄₁` holds.
    pub hypothesis_holds: bool,
}

/// `ηλ̄₁ + ‖X(w₀−w*)‖²/η` (AdaGrad-Norm) or `ηλ̄₁ + ‖w₀−w*‖²/η` (AdaLoss).
pub fn bound_b_limit(problem: &LinRegProblem, b0: f64, eta: f64, w0: &[f64], method: Method) -> Result<BLimit> {
    check_positive("eta", eta)?;
    let st = stats(problem, w0)?;
    let tail = match method {
        Method::AdaGradNorm => st.xd,
        Method::AdaLoss => st.d0,
    };
    Ok(BLimit { value: eta * st.l1 + tail / eta, hypothesis_holds: b0 >= eta * st.l1 })
}

/// Bound on ‖w_{J−1} − w*‖² at the first index J with `b_J > ηλ̄₁`
/// (single-sample setting, `lambda1 = sup‖x_i‖²`).
pub fn bound_stochastic_dist(dist0_sq: f64, eta: f64, lambda1: f64, b0: f64, method: Method) -> f64 {
    let log_term = (eta * lambda1 * lambda1 / (b0 * b0)).ln() + 1.0;
    match method {
        Method::AdaGradNorm => dist0_sq + eta * eta * log_term,
        Method::AdaLoss => dist0_sq + eta * eta * lambda1 * log_term,
    }
}

/// Bound on max_l b_{J+l} given ‖w_{J−1} − w*‖².
pub fn bound_stochastic_bmax(dist_sq: f64, eta: f64, lambda1: f64, method: Method) -> f64 {
    match method {
        Method::AdaGradNorm => eta * lambda1 + lambda1 / eta * dist_sq,
        Method::AdaLoss => eta * lambda1 + dist_sq / eta,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticN {
    pub n: u64,
    pub delta: f64,
    /// `1 − exp(−δ²/(2(Nγ(1−γ)+δ)))`
    pub probability: f64,
}

/// Steps after which either `b_N > ηλ̄₁` or min_j ‖w_j − w*‖² ≤ ε with high
/// probability. With `delta = None`, δ = 0.1·γ·N₀ refined once.
pub fn bound_stochastic_n(
    mu: f64,
    gamma: f64,
    eps: f64,
    b0: f64,
    eta: f64,
    lambda1: f64,
    delta: Option<f64>,
) -> Result<StochasticN> {
    check_positive("mu", mu)?;
    check_positive("eps", eps)?;
    check_positive("eta", eta)?;
    check_positive("lambda1", lambda1)?;
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(LinRegError::Parameter(format!("gamma must be in (0, 1], got {gamma}")));
    }
    if !(b0 >= 0.0 && b0.is_finite()) {
        return Err(LinRegError::Parameter(format!("b0 must be nonnegative, got {b0}")));
    }
    let c2 = (eta * lambda1).powi(2);
    let count = |delta: f64| -> u64 {
        let raw = ((c2 - b0 * b0) / (mu * gamma * eps) + delta / gamma).ceil() + 1.0;
        raw.max(1.0) as u64
    };
    let delta = match delta {
        Some(d) if d >= 0.0 => d,
        Some(d) => return Err(LinRegError::Parameter(format!("delta must be nonnegative, got {d}"))),
        None => {
            let n0 = count(0.0);
            let d1 = 0.1 * gamma * n0 as f64;
            0.1 * gamma * count(d1) as f64
        }
    };
    let n = count(delta);
    let denom = 2.0 * (n as f64 * gamma * (1.0 - gamma) + delta);
    let probability = if denom > 0.0 { 1.0 - (-delta * delta / denom).exp() } else { 0.0 };
    Ok(StochasticN { n, delta, probability })
}

#[cfg(test)]
mod tests {
    use super::*;
    use numerics_core::{DenseMatrix, RngStream};

    use crate::{gen_problem, run_linreg, Conditioning, RunOptions};
    use stepsize_controllers::{ControllerKind, ControllerState, Optimizer};

    fn unit_scalar() -> LinRegProblem {
        LinRegProblem::from_parts(DenseMatrix::new(1, 1, vec![1.0]).unwrap(), vec![0.0]).unwrap()
    }

    #[test]
    fn crossing_example() {
        // λ̄₁ = 2 with s₁ = 1
        let p = LinRegProblem::from_parts(DenseMatrix::new(1, 1, vec![2f64.sqrt()]).unwrap(), vec![0.0]).unwrap();
        assert!((p.lambda_1() - 2.0).abs() < 1e-15);
        let (n, _) = bound_crossing(&p, 0.1, 1.0, &[1.0]).unwrap();
        let expect = (1.0 + 3.96 / 4.0f64).ln() / 5f64.ln() + 1.0;
        assert!((n - expect).abs() < 1e-12);
        assert!((n - 1.43).abs() < 0.005);
    }

    #[test]
    fn crossing_errors() {
        let p = unit_scalar();
        assert!(matches!(bound_crossing(&p, 0.5, 1.0, &[1.0]), Err(LinRegError::NotApplicable(_))));
        assert!(matches!(bound_crossing(&p, 0.1, 1.0, &[0.0]), Err(LinRegError::Degenerate(_))));
    }

    #[test]
    fn scalar_case_a_terms() {
        let p = unit_scalar();
        let tb = bound_t(&p, Method::AdaGradNorm, 10.0, 1.0, 1e-8, &[1.0]).unwrap();
        assert_eq!(tb.case, InitCase::A);
        assert_eq!(tb.t3, 2.0);
        assert_eq!(tb.t2, 1.0);
        assert_eq!(tb.t1, 0.0);
        let expect = (2.0 * (1e8f64).ln()).ceil() + 1.0;
        assert_eq!(tb.t_total, expect);
    }

    #[test]
    fn oversized_b0_outruns_case_a_count() {
        // No term grows with b₀ once √(b₀² + ‖XᵀXΔ₀‖²) leaves the T₁ window,
        // while the realized contraction is (1 − η/b)² ≈ 0.81 per step here.
        let p = unit_scalar();
        let tb = bound_t(&p, Method::AdaGradNorm, 10.0, 1.0, 1e-8, &[1.0]).unwrap();
        let opt = Optimizer::Scalar(ControllerState::new(ControllerKind::AdaGradNorm, 10.0, 1.0).unwrap());
        let t = run_linreg(&p, &opt, &[1.0], &RunOptions { steps: 10_000, ..Default::default() }, &mut RngStream::new(0))
            .unwrap();
        assert!(t.converged);
        assert!(t.iterations() as f64 > 2.0 * tb.t_total);
    }

    #[test]
    fn gaussian_problems_within_bound() {
        let mut s = RngStream::new(21);
        for _ in 0..5 {
            let p = gen_problem(200, 10, Conditioning::Iid, &mut s).unwrap();
            let w0 = vec![0.0; 10];
            for method in [Method::AdaGradNorm, Method::AdaLoss] {
                let kind = match method {
                    Method::AdaGradNorm => ControllerKind::AdaGradNorm,
                    Method::AdaLoss => ControllerKind::AdaLoss,
                };
                for b0 in [1e-3, 1.0, 100.0] {
                    let tb = bound_t(&p, method, b0, 1.0, 1e-8, &w0).unwrap();
                    let opt = Optimizer::Scalar(ControllerState::new(kind, b0, 1.0).unwrap());
                    let opts = RunOptions { steps: 100_000, ..Default::default() };
                    let t = run_linreg(&p, &opt, &w0, &opts, &mut RngStream::new(0)).unwrap();
                    assert!(t.converged);
                    assert!(t.iterations() as f64 <= tb.t_total, "{method:?} b0={b0}: {} > {}", t.iterations(), tb.t_total);
                }
            }
        }
    }

    #[test]
    fn boundary_is_case_a() {
        let p = unit_scalar();
        let tb = bound_t(&p, Method::AdaLoss, 0.5, 1.0, 1e-8, &[1.0]).unwrap();
        assert_eq!(tb.case, InitCase::A);
        let tb = bound_t(&p, Method::AdaLoss, 0.499, 1.0, 1e-8, &[1.0]).unwrap();
        assert_eq!(tb.case, InitCase::B);
    }

    #[test]
    fn parameter_errors() {
        let p = unit_scalar();
        assert!(bound_t(&p, Method::AdaLoss, 0.0, 1.0, 1e-8, &[1.0]).is_err());
        assert!(bound_t(&p, Method::AdaLoss, 1.0, 1.0, 0.0, &[1.0]).is_err());
    }

    #[test]
    fn b_limit_examples() {
        let p = unit_scalar();
        let agn = bound_b_limit(&p, 1.0, 1.0, &[2.0], Method::AdaGradNorm).unwrap();
        let al = bound_b_limit(&p, 1.0, 1.0, &[2.0], Method::AdaLoss).unwrap();
        assert_eq!((agn.value, al.value), (5.0, 5.0));
        assert!(agn.hypothesis_holds);
        let at_star = bound_b_limit(&p, 1.0, 1.0, &[0.0], Method::AdaGradNorm).unwrap();
        assert_eq!(at_star.value, 1.0);
    }

    #[test]
    fn stochastic_n_examples() {
        let r = bound_stochastic_n(1.0, 1.0, 1.0, 0.0, 2.0, 2.0, Some(0.0)).unwrap();
        assert_eq!(r.n, 17);
        let r = bound_stochastic_n(0.3, 0.5, 1.0, 4.0, 2.0, 2.0, Some(1.0)).unwrap();
        assert_eq!(r.n, 3);
        assert!(bound_stochastic_n(1.0, 0.0, 1.0, 0.0, 1.0, 1.0, None).is_err());
        let auto = bound_stochastic_n(0.5, 0.4, 0.1, 0.1, 1.0, 10.0, None).unwrap();
        assert!(auto.delta > 0.0 && auto.probability > 0.0 && auto.probability < 1.0);
    }

    #[test]
    fn case_b_components_nonnegative() {
        let p = gen_problem(100, 5, Conditioning::Iid, &mut RngStream::new(7)).unwrap();
        let w0 = vec![0.0; 5];
        for method in [Method::AdaGradNorm, Method::AdaLoss] {
            let tb = bound_t(&p, method, 1e-3, 1.0, 1e-8, &w0).unwrap();
            assert_eq!(tb.case, InitCase::B);
            for v in [tb.t1, tb.t2, tb.t3, tb.s, tb.delta_s.unwrap()] {
                assert!(v >= 0.0);
            }
            assert!(tb.t_total >= tb.t_main);
        }
    }
}
