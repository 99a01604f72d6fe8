use numerics_core::norm_sq;

use crate::{LinRegError, LinRegProblem, LinRegTrajectory, Result};

const REL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inequality {
    /// ‖X(w_{t+1}−w*)‖² ≤ ‖XΔ_t‖² − (2h)(1 − hλ̄₁/2)‖XᵀXΔ_t‖², h = η/b_{t+1}.
    PredictionDescent,
    /// ‖Δ_{t+1}‖² ≤ (1 − 2hλ̄ₙ(1 − hλ̄₁/2))‖Δ_t‖², only checked when b_{t+1} ≥ ηλ̄₁/2.
    Contraction,
    /// ‖Δ_{t+1}‖² ≤ (1 − 2hλ̄₁λ̄ₙ/(λ̄₁+λ̄ₙ))‖Δ_t‖² + h(h − 2/(λ̄₁+λ̄ₙ))‖XᵀXΔ_t‖².
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityCheck {
    pub inequality: Inequality,
    pub step: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InequalityReport {
    pub checks: Vec<InequalityCheck>,
}

impl InequalityReport {
    pub fn violations(&self) -> Vec<&InequalityCheck> {
        self.checks.iter().filter(|c| !c.holds).collect()
    }

    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

/// `noise` is the absolute round-off carried by the stored iterate into `lhs`.
fn check(inequality: Inequality, step: usize, lhs: f64, rhs: f64, scale: f64, noise: f64) -> InequalityCheck {
    let slack = REL_SLACK * lhs.abs().max(rhs.abs()).max(scale) + noise;
    InequalityCheck { inequality, step, lhs, rhs, holds: lhs <= rhs + slack }
}

/// Evaluates the three per-step inequalities along a deterministic trajectory
/// recorded with `keep_iterates`.
pub fn verify_inequalities(problem: &LinRegProblem, trajectory: &LinRegTrajectory) -> Result<InequalityReport> {
    let recs = &trajectory.records;
    let its = &trajectory.iterates;
    if its.len() != recs.len() {
        return Err(LinRegError::Parameter("trajectory was recorded without iterates".into()));
    }
    let (l1, ln) = (problem.lambda_1(), problem.lambda_n());
    let d = problem.d();
    let w_star_norm = norm_sq(&problem.w_star).sqrt();
    let mut report = InequalityReport::default();
    for t in 0..its.len().saturating_sub(1) {
        let h = recs[t + 1].eff_lr;
        let d0 = problem.delta(&its[t]);
        let d1 = problem.delta(&its[t + 1]);
        let xd0 = problem.x.matvec(&d0);
        let xxd0 = norm_sq(&problem.x.t_matvec(&xd0));
        let (e0, e1) = (norm_sq(&d0), norm_sq(&d1));
        let p0 = norm_sq(&xd0);
        let p1 = norm_sq(&problem.x.matvec(&d1));
        // w_{t+1} is stored with O(u·‖w‖) error per coordinate; near w* this
        // dominates ‖Δ_{t+1}‖².
        let dw = 4.0 * f64::EPSILON * (d as f64).sqrt() * (norm_sq(&its[t + 1]).sqrt() + w_star_norm);
        let e_noise = 2.0 * e1.sqrt() * dw + dw * dw;
        let dp = l1.sqrt() * dw;
        let p_noise = 2.0 * p1.sqrt() * dp + dp * dp;

        let descent = 2.0 * h * (1.0 - h * l1 / 2.0) * xxd0;
        report.checks.push(check(Inequality::PredictionDescent, t, p1, p0 - descent, p0, p_noise));

        if h * l1 <= 2.0 {
            let factor = 1.0 - 2.0 * h * ln * (1.0 - h * l1 / 2.0);
            report.checks.push(check(Inequality::Contraction, t, e1, factor * e0, e0, e_noise));
        }

        let lead = (1.0 - 2.0 * h * l1 * ln / (l1 + ln)) * e0;
        let tail = h * (h - 2.0 / (l1 + ln)) * xxd0;
        report.checks.push(check(Inequality::Mixed, t, e1, lead + tail, lead.abs().max(tail.abs()), e_noise));
    }
    Ok(report)
}
