use numerics_core::{normalize_rows, norm_sq, sample_gaussian_matrix, DenseMatrix, RngStream};

use crate::{Result, TwoLayerError};

pub const UNIT_ROW_TOL: f64 = 1e-12;

/// Unit-norm inputs with bounded labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    pub x: DenseMatrix,
    pub y: Vec<f64>,
}

impl DataSet {
    pub fn new(x: DenseMatrix, y: Vec<f64>) -> Result<Self> {
        if y.len() != x.rows() {
            return Err(TwoLayerError::Dimension(format!("{} labels for {} samples", y.len(), x.rows())));
        }
        for i in 0..x.rows() {
            let norm = norm_sq(x.row(i)).sqrt();
            if (norm - 1.0).abs() > UNIT_ROW_TOL {
                return Err(TwoLayerError::Precondition(format!("row {i} has norm {norm}")));
            }
        }
        Ok(Self { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    /// Rows picked by `indices`, repeats allowed.
    pub fn subset(&self, indices: &[usize]) -> DataSet {
        let d = self.d();
        let mut x = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            x.extend_from_slice(self.x.row(i));
        }
        let x = DenseMatrix::new(indices.len(), d, x).expect("row slices have width d");
        DataSet { x, y: indices.iter().map(|&i| self.y[i]).collect() }
    }
}

/// Gaussian rows projected to the sphere; labels uniform in [−bound, bound].
pub fn gen_dataset(n: usize, d: usize, label_bound: f64, stream: &mut RngStream) -> Result<DataSet> {
    if !(label_bound >= 0.0) {
        return Err(TwoLayerError::Parameter(format!("label bound {label_bound}")));
    }
    let x = normalize_rows(&sample_gaussian_matrix(n, d, stream)?)?;
    let y = (0..n).map(|_| stream.uniform(-label_bound, label_bound)).collect();
    DataSet::new(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_rows_are_unit() {
        let data = gen_dataset(30, 5, 1.0, &mut RngStream::new(1)).unwrap();
        for i in 0..30 {
            assert!((norm_sq(data.x.row(i)) - 1.0).abs() < 1e-14);
        }
        assert!(data.y.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn rejects_non_unit_rows() {
        let x = DenseMatrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        assert!(matches!(DataSet::new(x, vec![0.0]), Err(TwoLayerError::Precondition(_))));
    }
}
