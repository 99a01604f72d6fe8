use numerics_core::{sample_gaussian_matrix, DenseMatrix, RngStream};

use crate::{DataSet, Result, TwoLayerError};

/// `f(x) = (1/√m) Σ_r a_r·max(0, w_rᵀx)` with the output signs `a` frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLayerNet {
    w: DenseMatrix,
    a: Vec<f64>,
    w0: DenseMatrix,
}

pub fn init_net(m: usize, d: usize, stream: &mut RngStream) -> Result<TwoLayerNet> {
    let w = sample_gaussian_matrix(m, d, stream)?;
    let a = (0..m).map(|_| stream.sign()).collect();
    TwoLayerNet::from_parts(w, a)
}

impl TwoLayerNet {
    pub fn from_parts(w: DenseMatrix, a: Vec<f64>) -> Result<Self> {
        if a.len() != w.rows() {
            return Err(TwoLayerError::Dimension(format!("{} output signs for {} neurons", a.len(), w.rows())));
        }
        if a.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(TwoLayerError::Parameter("output weights must be ±1".into()));
        }
        Ok(Self { w0: w.clone(), w, a })
    }

    pub fn m(&self) -> usize {
        self.w.rows()
    }

    pub fn d(&self) -> usize {
        self.w.cols()
    }

    pub fn w(&self) -> &DenseMatrix {
        &self.w
    }

    /// Snapshot taken at construction.
    pub fn w0(&self) -> &DenseMatrix {
        &self.w0
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    fn check(&self, data: &DataSet) -> Result<()> {
        if data.d() != self.d() {
            return Err(TwoLayerError::Dimension(format!("data has d = {}, net has d = {}", data.d(), self.d())));
        }
        Ok(())
    }

    /// `W Xᵀ`, m×n.
    pub fn preactivations(&self, data: &DataSet) -> Result<DenseMatrix> {
        self.check(data)?;
        Ok(self.w.matmul_t(&data.x)?)
    }

    pub fn output_from_pre(&self, pre: &DenseMatrix) -> Vec<f64> {
        let n = pre.cols();
        let mut u = vec![0.0; n];
        for (r, &a) in self.a.iter().enumerate() {
            for (ui, &p) in u.iter_mut().zip(pre.row(r)) {
                if p > 0.0 {
                    *ui += a * p;
                }
            }
        }
        let s = 1.0 / (self.m() as f64).sqrt();
        u.iter_mut().for_each(|v| *v *= s);
        u
    }

    pub fn forward(&self, data: &DataSet) -> Result<Vec<f64>> {
        Ok(self.output_from_pre(&self.preactivations(data)?))
    }

    /// `(½‖y − u‖², y − u)`
    pub fn loss_and_residual(&self, data: &DataSet) -> Result<(f64, Vec<f64>)> {
        let u = self.forward(data)?;
        Ok(residual_of(data, &u))
    }

    /// Row r is `−(1/√m) Σ_i weight_i a_r x_i 1{w_rᵀx_i ≥ 0}`; with
    /// `weights = y − u` this is ∂L/∂w_r.
    pub fn gradient_from_pre(&self, pre: &DenseMatrix, data: &DataSet, weights: &[f64]) -> Result<DenseMatrix> {
        let n = data.n();
        if weights.len() != n || pre.cols() != n || pre.rows() != self.m() {
            return Err(TwoLayerError::Dimension("weights / pre-activations do not match the data".into()));
        }
        let s = -1.0 / (self.m() as f64).sqrt();
        let mut coef = DenseMatrix::zeros(self.m(), n);
        for r in 0..self.m() {
            let a = self.a[r] * s;
            for ((c, &p), &e) in coef.row_mut(r).iter_mut().zip(pre.row(r)).zip(weights) {
                if p >= 0.0 {
                    *c = a * e;
                }
            }
        }
        Ok(coef.matmul(&data.x)?)
    }

    pub fn per_neuron_gradient(&self, data: &DataSet, residual: &[f64]) -> Result<DenseMatrix> {
        let pre = self.preactivations(data)?;
        self.gradient_from_pre(&pre, data, residual)
    }

    /// `W ← W − lr·G`
    pub fn step(&mut self, grad: &DenseMatrix, lr: f64) {
        self.w.as_mut_slice().iter_mut().zip(grad.as_slice()).for_each(|(w, g)| *w -= lr * g);
    }

    /// `W ← W + D`
    pub fn apply(&mut self, delta: &[f64]) {
        self.w.as_mut_slice().iter_mut().zip(delta).for_each(|(w, d)| *w += d);
    }

    /// max_r ‖w_r − w_r(0)‖
    pub fn max_drift(&self) -> f64 {
        (0..self.m())
            .map(|r| self.w.row(r).iter().zip(self.w0.row(r)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .fold(0.0, f64::max)
            .sqrt()
    }
}

pub(crate) fn residual_of(data: &DataSet, u: &[f64]) -> (f64, Vec<f64>) {
    let e: Vec<f64> = data.y.iter().zip(u).map(|(y, u)| y - u).collect();
    (0.5 * e.iter().map(|v| v * v).sum::<f64>(), e)
}

pub(crate) fn max_row_norm(g: &DenseMatrix) -> f64 {
    (0..g.rows()).map(|r| g.row(r).iter().map(|v| v * v).sum::<f64>()).fold(0.0, f64::max).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen_dataset;

    fn unit_data(rows: &[Vec<f64>], y: Vec<f64>) -> DataSet {
        DataSet::new(DenseMatrix::from_rows(rows).unwrap(), y).unwrap()
    }

    #[test]
    fn init_is_deterministic_and_snapshotted() {
        let a = init_net(20, 3, &mut RngStream::new(5)).unwrap();
        let b = init_net(20, 3, &mut RngStream::new(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.w(), a.w0());
    }

    #[test]
    fn sign_balance() {
        let net = init_net(10_000, 2, &mut RngStream::new(8)).unwrap();
        let plus = net.a().iter().filter(|&&s| s > 0.0).count() as f64 / 10_000.0;
        assert!((plus - 0.5).abs() < 0.02);
    }

    #[test]
    fn forward_examples() {
        let data = unit_data(&[vec![1.0, 0.0]], vec![0.0]);
        let net = TwoLayerNet::from_parts(DenseMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap(), vec![1.0]).unwrap();
        assert_eq!(net.forward(&data).unwrap(), vec![1.0]);

        let dead = TwoLayerNet::from_parts(DenseMatrix::from_rows(&[vec![-1.0, 0.0]]).unwrap(), vec![1.0]).unwrap();
        assert_eq!(dead.forward(&data).unwrap(), vec![0.0]);

        let w = DenseMatrix::from_rows(&vec![vec![1.0, 0.0]; 4]).unwrap();
        let cancel = TwoLayerNet::from_parts(w, vec![1.0, 1.0, -1.0, -1.0]).unwrap();
        assert_eq!(cancel.forward(&data).unwrap(), vec![0.0]);
    }

    #[test]
    fn loss_examples() {
        let data = unit_data(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![3.0, 4.0]);
        let w = DenseMatrix::from_rows(&[vec![-1.0, -1.0]]).unwrap();
        let net = TwoLayerNet::from_parts(w, vec![1.0]).unwrap();
        let (l, e) = net.loss_and_residual(&data).unwrap();
        assert_eq!(l, 12.5);
        assert_eq!(e, vec![3.0, 4.0]);
    }

    #[test]
    fn gradient_equality_case() {
        let data = unit_data(&[vec![1.0, 0.0]], vec![0.0]);
        let net = TwoLayerNet::from_parts(DenseMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap(), vec![1.0]).unwrap();
        let (_, e) = net.loss_and_residual(&data).unwrap();
        let g = net.per_neuron_gradient(&data, &e).unwrap();
        assert_eq!(g.row(0), &[1.0, 0.0]);
        assert_eq!(max_row_norm(&g), 1.0);
    }

    #[test]
    fn zero_residual_zero_gradient() {
        let data = gen_dataset(5, 3, 1.0, &mut RngStream::new(2)).unwrap();
        let net = init_net(7, 3, &mut RngStream::new(3)).unwrap();
        let g = net.per_neuron_gradient(&data, &[0.0; 5]).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_mismatch() {
        let data = gen_dataset(5, 3, 1.0, &mut RngStream::new(2)).unwrap();
        let net = init_net(7, 4, &mut RngStream::new(3)).unwrap();
        assert!(matches!(net.forward(&data), Err(TwoLayerError::Dimension(_))));
    }
}
