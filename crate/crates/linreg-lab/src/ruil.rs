use numerics_core::{dot, norm_sq, RngStream};

use crate::{LinRegError, LinRegProblem, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuilKind {
    /// `⟨x_i, w − w*⟩² ≥ μ‖w − w*‖²`, paired with AdaLoss.
    Loss,
    /// `‖∇f_i(w)‖² ≥ μ‖w − w*‖²`, paired with AdaGrad-Norm.
    Gradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuilEstimate {
    pub mu: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub kind: RuilKind,
}

const RADII: [f64; 3] = [2.0, 10.0, 100.0];

/// Per-sample ratios event_i / ‖δ‖² for the probe offset `delta`.
fn ratios(problem: &LinRegProblem, delta: &[f64], kind: RuilKind) -> Vec<f64> {
    let dd = norm_sq(delta);
    (0..problem.n())
        .map(|i| {
            let row = problem.x.row(i);
            let p = dot(row, delta);
            let v = match kind {
                RuilKind::Loss => p * p,
                RuilKind::Gradient => norm_sq(row) * p * p,
            };
            v / dd
        })
        .collect()
}

fn probe(d: usize, radius_sq: f64, stream: &mut RngStream) -> Vec<f64> {
    loop {
        let mut u = stream.normal_vec(d);
        let nn = norm_sq(&u);
        if nn > 0.0 {
            let s = (radius_sq / nn).sqrt();
            u.iter_mut().for_each(|v| *v *= s);
            return u;
        }
    }
}

/// Fraction of samples satisfying the event at offset `delta`.
pub fn ruil_fraction(problem: &LinRegProblem, delta: &[f64], mu: f64, kind: RuilKind) -> f64 {
    let r = ratios(problem, delta, kind);
    r.iter().filter(|&&q| q >= mu).count() as f64 / r.len() as f64
}

/// Samples `num_probe_points` offsets on each of the spheres ‖w − w*‖² ∈
/// {2ε, 10ε, 100ε} and scores μ by its worst-case fraction γ(μ) over probes.
/// Returns the pair maximising μγ.
pub fn estimate_ruil(
    problem: &LinRegProblem,
    eps: f64,
    kind: RuilKind,
    num_probe_points: usize,
    stream: &mut RngStream,
) -> Result<RuilEstimate> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(LinRegError::Parameter(format!("eps must be positive, got {eps}")));
    }
    if num_probe_points == 0 {
        return Err(LinRegError::Parameter("num_probe_points must be >= 1".into()));
    }
    let n = problem.n();
    let mut sorted: Vec<Vec<f64>> = Vec::with_capacity(RADII.len() * num_probe_points);
    for radius in RADII {
        for _ in 0..num_probe_points {
            let delta = probe(problem.d(), radius * eps, stream);
            let mut r = ratios(problem, &delta, kind);
            r.sort_by(f64::total_cmp);
            sorted.push(r);
        }
    }
    // The largest μ whose worst-case count is at least k is the minimum over
    // probes of each probe's k-th largest ratio.
    let worst_count = |mu: f64| sorted.iter().map(|r| n - r.partition_point(|&q| q < mu)).min().unwrap_or(0);
    let mut best: Option<(f64, f64)> = None;
    for k in 1..=n {
        let mu = sorted.iter().map(|r| r[n - k]).fold(f64::INFINITY, f64::min);
        if !(mu > 0.0) {
            continue;
        }
        let gamma = worst_count(mu) as f64 / n as f64;
        if best.map_or(true, |(m, g)| mu * gamma > m * g) {
            best = Some((mu, gamma));
        }
    }
    let (mu, gamma) = best.ok_or_else(|| LinRegError::Estimation("no μ with positive γ".into()))?;
    Ok(RuilEstimate { mu, gamma, epsilon: eps, kind })
}
