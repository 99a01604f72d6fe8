use std::f64::consts::PI;

use crate::{Result, TwoLayerError};

/// Gaussian anti-concentration constant: P(|N(0,1)| < R) ≤ C₂R.
pub const C2_GAUSSIAN: f64 = 0.797_884_560_802_865_4; // √(2/π)

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub n: usize,
    pub m: usize,
    /// λ_min(H^∞)
    pub lambda0: f64,
    /// ‖H^∞‖
    pub h_inf_norm: f64,
    /// Failure probability over the initialization.
    pub delta: f64,
    pub eta: f64,
    pub alpha: f64,
    pub b0: f64,
    /// ‖y − u(0)‖
    pub residual0: f64,
    /// The small constant in R = cλ₀δ/n³.
    pub c: f64,
    pub eps: f64,
    /// Realized ‖y − u(T₀)‖ when known; otherwise the log-growth bound is used.
    pub residual_t0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLayerBounds {
    pub r: f64,
    pub r_prime: f64,
    pub r_hat: f64,
    pub r_tilde: f64,
    pub c: f64,
    pub c1: f64,
    pub delta1: f64,
    pub c2: f64,
    /// Level ηC(λ₀ + ‖H^∞‖)/2 that b_k must reach.
    pub crossing_level: f64,
    pub t0_dynamical: u64,
    /// Bound on ‖y − u(T₀)‖² from the logarithmic growth lemma.
    pub residual_t0_sq_bound: f64,
    pub b_inf: f64,
    pub b_bar_inf: f64,
}

impl TwoLayerBounds {
    /// sup_{k ≥ T₀} b_k given the realized b_{T₀} and ‖y − u(T₀)‖².
    pub fn b_after_crossing(&self, inp: &BoundInputs, b_t0: f64, residual_t0_sq: f64) -> f64 {
        b_t0 + growth_gain(inp, self.c, self.c1) * residual_t0_sq
    }
}

/// α²√n(λ₀ + C‖H^∞‖)/(2ηĈ₁‖H^∞‖λ₀), with Ĉ₁ = C₁.
fn growth_gain(inp: &BoundInputs, c: f64, c1: f64) -> f64 {
    let rn = (inp.n as f64).sqrt();
    inp.alpha * inp.alpha * rn * (inp.lambda0 + c * inp.h_inf_norm)
        / (2.0 * inp.eta * c1 * inp.h_inf_norm * inp.lambda0)
}

/// N = ⌈(L² − b₀²)/(γ√ε)⌉ + 1 for b²_{j+1} = b²_j + γa_j. The gap is taken
/// as 0 once b₀ ≥ L.
pub fn dynamical_system_n(b0: f64, level: f64, gamma: f64, eps: f64) -> Result<u64> {
    if !(b0 > 0.0 && level > 0.0 && gamma > 0.0 && eps > 0.0) {
        return Err(TwoLayerError::Parameter("b0, L, gamma and eps must be positive".into()));
    }
    let gap = (level * level - b0 * b0).max(0.0);
    Ok((gap / (gamma * eps.sqrt())).ceil() as u64 + 1)
}

/// B = 1 − 2nC₂(√n + n)R/(λ₀δ)
pub fn condition2_b(n: usize, lambda0: f64, delta: f64, r: f64) -> f64 {
    let nf = n as f64;
    1.0 - 2.0 * nf * C2_GAUSSIAN * (nf.sqrt() + nf) * r / (lambda0 * delta)
}

/// 2n(2αn^{−3/4} + η)/(λ₀B)
pub fn condition2_threshold(n: usize, alpha: f64, eta: f64, lambda0: f64, b: f64) -> f64 {
    let nf = n as f64;
    2.0 * nf * (2.0 * alpha * nf.powf(-0.75) + eta) / (lambda0 * b)
}

/// Drift bound for the square rule before crossing ηλ_max(H(0)):
/// η√(2(k+1))/(α²√m)·√(1 + 2 log(ηλ_max(H(0))/b₀)). The log is floored at 0.
pub fn square_rule_drift_bound(eta: f64, alpha: f64, m: usize, k: usize, lambda_max_h0: f64, b0: f64) -> f64 {
    let log = (eta * lambda_max_h0 / b0).ln().max(0.0);
    eta * (2.0 * (k as f64 + 1.0)).sqrt() / (alpha * alpha * (m as f64).sqrt()) * (1.0 + 2.0 * log).sqrt()
}

pub fn bounds_and_constants(inp: &BoundInputs) -> Result<TwoLayerBounds> {
    let positive = [
        ("lambda0", inp.lambda0),
        ("h_inf_norm", inp.h_inf_norm),
        ("delta", inp.delta),
        ("eta", inp.eta),
        ("alpha", inp.alpha),
        ("b0", inp.b0),
        ("c", inp.c),
        ("eps", inp.eps),
    ];
    for (name, v) in positive {
        if !(v > 0.0 && v.is_finite()) {
            return Err(TwoLayerError::Parameter(format!("{name} must be positive, got {v}")));
        }
    }
    if inp.n == 0 || inp.m == 0 || !(inp.residual0 >= 0.0) {
        return Err(TwoLayerError::Parameter("need n, m >= 1 and residual0 >= 0".into()));
    }
    let nf = inp.n as f64;
    let (rn, rm) = (nf.sqrt(), (inp.m as f64).sqrt());
    let (l0, h, dl) = (inp.lambda0, inp.h_inf_norm, inp.delta);

    let r = inp.c * l0 * dl / nf.powi(3);
    let r_prime = 4.0 * rn * inp.residual0 / (rm * l0);
    let n32 = nf.powf(1.5);
    let delta1 = (nf.powf(2.5) * r / (2.0 * dl) + 2.0 * nf * nf * r / dl + 2.0 * n32 * r / dl) * n32 * r / dl;
    let c1 = 1.0 - n32 * (rn + 2.0) * r / (2.0 * l0 * dl);
    if !(c1 > 0.0) {
        return Err(TwoLayerError::Precondition(format!("C1 = {c1} is not positive; R is too large")));
    }
    let c = ((l0 * dl + 2.0 * n32 * r + nf * nf * r) * (h + 4.0 * nf * nf * r / ((2.0 * PI).sqrt() * dl)) / (l0 * dl)
        + delta1)
        / (c1 * h);

    let gamma = inp.alpha * inp.alpha * rn;
    let crossing_level = inp.eta * c * (l0 + h) / 2.0;
    let t0 = dynamical_system_n(inp.b0, crossing_level, gamma, inp.eps)?;

    let pre_log = (c * (l0 + h) / (2.0 * inp.b0)).ln().max(0.0);
    let r_hat =
        inp.eta * (2.0 * (t0 as f64 + 1.0)).sqrt() / (inp.alpha * rm) * (1.0 + 2.0 * pre_log).sqrt();

    let res0_sq = inp.residual0 * inp.residual0;
    let residual_t0_sq_bound =
        res0_sq + 2.0 * inp.eta * inp.eta * c * h * h / (inp.alpha * inp.alpha * rn) * pre_log;
    let res_t0 = inp.residual_t0.unwrap_or(residual_t0_sq_bound.sqrt());
    let r_tilde = 4.0 * rn / rm * (l0 + c * h) / (2.0 * c1 * h * l0) * res_t0;

    let b_inf = inp.b0 + growth_gain(inp, c, c1) * res0_sq;
    let bar_log = (inp.eta * c * h / inp.b0).ln().max(0.0);
    let b_bar_inf = inp.eta * c * h
        + 4.0 * gamma / (inp.eta * l0 * c1)
            * (res0_sq + 2.0 * inp.eta * inp.eta * (c * h) * (c * h) / gamma * bar_log);

    Ok(TwoLayerBounds {
        r,
        r_prime,
        r_hat,
        r_tilde,
        c,
        c1,
        delta1,
        c2: C2_GAUSSIAN,
        crossing_level,
        t0_dynamical: t0,
        residual_t0_sq_bound,
        b_inf,
        b_bar_inf,
    })
}
