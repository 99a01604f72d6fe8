use numerics_core::{dot, norm_sq, sample_gaussian_matrix, sym_eigendecompose, DenseMatrix, RngStream, SpectralDecomposition};

use crate::{LinRegError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditioning {
    Iid,
    /// Every row shares one Gaussian component, so λ̄₁ grows linearly in n.
    Correlated,
}

/// `min ½‖Xw − y‖²` with `y = Xw*`.
#[derive(Debug, Clone)]
pub struct LinRegProblem {
    pub x: DenseMatrix,
    pub y: Vec<f64>,
    pub w_star: Vec<f64>,
    /// Eigendecomposition of XᵀX.
    pub spectral: SpectralDecomposition,
}

const RANK_TOL: f64 = 1e-10;

impl LinRegProblem {
    pub fn from_parts(x: DenseMatrix, w_star: Vec<f64>) -> Result<Self> {
        if w_star.len() != x.cols() {
            return Err(LinRegError::Parameter(format!(
                "w* has length {} but X has {} columns",
                w_star.len(),
                x.cols()
            )));
        }
        let y = x.matvec(&w_star);
        let spectral = sym_eigendecompose(&x.gram())?;
        let (l1, ln) = (spectral.lambda_max(), spectral.lambda_min());
        if !(ln > RANK_TOL * l1) {
            return Err(LinRegError::Degenerate(format!("λ_min = {ln:e} with λ_max = {l1:e}")));
        }
        Ok(Self { x, y, w_star, spectral })
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    /// λ̄₁
    pub fn lambda_1(&self) -> f64 {
        self.spectral.lambda_max()
    }

    /// λ̄ₙ
    pub fn lambda_n(&self) -> f64 {
        self.spectral.lambda_min()
    }

    /// `Xw − y`
    pub fn residual(&self, w: &[f64]) -> Vec<f64> {
        let mut r = self.x.matvec(w);
        r.iter_mut().zip(&self.y).for_each(|(a, b)| *a -= b);
        r
    }

    pub fn loss(&self, w: &[f64]) -> f64 {
        0.5 * norm_sq(&self.residual(w))
    }

    /// ‖w − w*‖²
    pub fn error(&self, w: &[f64]) -> f64 {
        w.iter().zip(&self.w_star).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    pub fn delta(&self, w: &[f64]) -> Vec<f64> {
        w.iter().zip(&self.w_star).map(|(a, b)| a - b).collect()
    }

    /// `Vᵀ(w − w*)`
    pub fn hat(&self, w: &[f64]) -> Vec<f64> {
        self.spectral.to_eigenbasis(&self.delta(w))
    }

    /// `x_iᵀw − y_i`
    pub fn sample_residual(&self, i: usize, w: &[f64]) -> f64 {
        dot(self.x.row(i), w) - self.y[i]
    }

    /// sup_i ‖x_i‖², the curvature constant of the single-sample setting.
    pub fn max_row_norm_sq(&self) -> f64 {
        (0..self.n()).map(|i| norm_sq(self.x.row(i))).fold(0.0, f64::max)
    }
}

pub fn gen_problem(n: usize, d: usize, conditioning: Conditioning, stream: &mut RngStream) -> Result<LinRegProblem> {
    if d == 0 || n < d {
        return Err(LinRegError::Parameter(format!("need n >= d >= 1, got n={n}, d={d}")));
    }
    let mut last = None;
    for _ in 0..2 {
        let mut x = sample_gaussian_matrix(n, d, stream)?;
        if conditioning == Conditioning::Correlated {
            let shared = stream.normal_vec(d);
            for r in 0..n {
                x.row_mut(r).iter_mut().zip(&shared).for_each(|(a, s)| *a += s);
            }
        }
        let w_star = stream.normal_vec(d);
        match LinRegProblem::from_parts(x, w_star) {
            Err(e @ LinRegError::Degenerate(_)) => last = Some(e),
            other => return other,
        }
    }
    Err(last.expect("two attempts"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_problem() {
        let x = DenseMatrix::new(1, 1, vec![2.0]).unwrap();
        let p = LinRegProblem::from_parts(x, vec![3.0]).unwrap();
        assert_eq!(p.y, vec![6.0]);
        assert_eq!(p.lambda_1(), 4.0);
        assert_eq!(p.lambda_n(), 4.0);
    }

    #[test]
    fn interpolates_at_w_star() {
        let p = gen_problem(50, 5, Conditioning::Iid, &mut RngStream::new(3)).unwrap();
        assert_eq!(p.loss(&p.w_star), 0.0);
        assert_eq!(p.error(&p.w_star), 0.0);
    }

    #[test]
    fn large_problem_is_well_posed() {
        let p = gen_problem(1000, 20, Conditioning::Iid, &mut RngStream::new(1)).unwrap();
        assert!(p.lambda_n() > 0.0);
        // Marchenko–Pastur edges n(1 ± √(d/n))²
        assert!((p.lambda_1() / 1000.0 - 1.3).abs() < 0.1);
        assert!((p.lambda_n() / 1000.0 - 0.74).abs() < 0.1);
    }

    #[test]
    fn correlated_top_eigenvalue_grows_with_n() {
        let small = gen_problem(100, 10, Conditioning::Correlated, &mut RngStream::new(5)).unwrap();
        let big = gen_problem(1000, 10, Conditioning::Correlated, &mut RngStream::new(5)).unwrap();
        assert!(big.lambda_1() > 5.0 * small.lambda_1());
        assert!(small.lambda_1() / small.lambda_n() > 3.0);
    }

    #[test]
    fn rank_deficient_rejected() {
        let x = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(LinRegProblem::from_parts(x, vec![1.0, 1.0]), Err(LinRegError::Degenerate(_))));
        assert!(gen_problem(3, 4, Conditioning::Iid, &mut RngStream::new(1)).is_err());
    }
}
