use std::f64::consts::PI;

use numerics_core::{spectral_extremes, DenseMatrix};

use crate::{DataSet, Result, TwoLayerError, TwoLayerNet};

const GRAM_UNIT_TOL: f64 = 1e-9;

/// `H^∞_ij = x_iᵀx_j (π − arccos(x_iᵀx_j)) / (2π)`
pub fn gram_infinity(data: &DataSet) -> Result<DenseMatrix> {
    let mut h = data.x.outer_gram();
    let n = h.rows();
    for i in 0..n {
        let norm = h[(i, i)];
        if (norm - 1.0).abs() > GRAM_UNIT_TOL {
            return Err(TwoLayerError::Precondition(format!("row {i} has squared norm {norm}")));
        }
    }
    for i in 0..n {
        let row = h.row_mut(i);
        for (j, v) in row.iter_mut().enumerate() {
            *v = if i == j {
                // arccos near 1 loses half the digits; the closed form is exact
                0.5
            } else {
                let c = v.clamp(-1.0, 1.0);
                c * (PI - c.acos()) / (2.0 * PI)
            };
        }
    }
    Ok(h)
}

/// Per-sample bitsets over neurons.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationBits {
    words: usize,
    m: usize,
    bits: Vec<u64>,
}

impl ActivationBits {
    fn empty(n: usize, m: usize) -> Self {
        let words = m.div_ceil(64);
        Self { words, m, bits: vec![0; n * words] }
    }

    /// Sets bit (i, r) wherever `keep(pre[r][i])`.
    pub fn from_pre(pre: &DenseMatrix, keep: impl Fn(f64) -> bool) -> Self {
        let (m, n) = (pre.rows(), pre.cols());
        let mut out = Self::empty(n, m);
        for r in 0..m {
            let (word, bit) = (r / 64, 1u64 << (r % 64));
            for (i, &p) in pre.row(r).iter().enumerate() {
                if keep(p) {
                    out.bits[i * out.words + word] |= bit;
                }
            }
        }
        out
    }

    /// `1{w_rᵀx_i ≥ 0}`
    pub fn active(pre: &DenseMatrix) -> Self {
        Self::from_pre(pre, |p| p >= 0.0)
    }

    pub fn n(&self) -> usize {
        self.bits.len() / self.words.max(1)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn sample(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    pub fn contains(&self, i: usize, r: usize) -> bool {
        self.sample(i)[r / 64] >> (r % 64) & 1 == 1
    }

    pub fn count(&self, i: usize) -> usize {
        self.sample(i).iter().map(|w| w.count_ones() as usize).sum()
    }
}

fn popcount_and(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum()
}

fn popcount_and3(a: &[u64], b: &[u64], c: &[u64]) -> u32 {
    a.iter().zip(b).zip(c).map(|((x, y), z)| (x & y & z).count_ones()).sum()
}

pub(crate) fn empirical_from_bits(data: &DataSet, act: &ActivationBits) -> DenseMatrix {
    let mut h = data.x.outer_gram();
    let n = data.n();
    let inv_m = 1.0 / act.m() as f64;
    for i in 0..n {
        for j in i..n {
            let c = popcount_and(act.sample(i), act.sample(j)) as f64;
            h.as_mut_slice()[i * n + j] *= c * inv_m;
        }
    }
    h.symmetrize_from_upper();
    h
}

/// `H_ij = (1/m) Σ_r x_iᵀx_j 1{w_rᵀx_i ≥ 0, w_rᵀx_j ≥ 0}`
pub fn gram_empirical(net: &TwoLayerNet, data: &DataSet) -> Result<DenseMatrix> {
    let pre = net.preactivations(data)?;
    Ok(empirical_from_bits(data, &ActivationBits::active(&pre)))
}

/// Neurons whose activation on x_i can flip within radius R of initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternSets {
    pub radius: f64,
    /// Bit (i, r) set iff r ∈ S_i^⊥, i.e. |w_r(0)ᵀx_i| < R.
    pub perp: ActivationBits,
}

impl PatternSets {
    pub fn perp_size(&self, i: usize) -> usize {
        self.perp.count(i)
    }

    pub fn stable_size(&self, i: usize) -> usize {
        self.perp.m() - self.perp_size(i)
    }

    pub fn total_perp(&self) -> usize {
        (0..self.perp.n()).map(|i| self.perp_size(i)).sum()
    }

    /// `H^⊥_ij = (1/m) Σ_{r ∈ S_i^⊥} x_iᵀx_j 1{w_rᵀx_i ≥ 0, w_rᵀx_j ≥ 0}` at the current weights.
    pub fn h_perp(&self, net: &TwoLayerNet, data: &DataSet) -> Result<DenseMatrix> {
        let pre = net.preactivations(data)?;
        let act = ActivationBits::active(&pre);
        let mut h = data.x.outer_gram();
        let n = data.n();
        let inv_m = 1.0 / act.m() as f64;
        for i in 0..n {
            for j in 0..n {
                let c = popcount_and3(self.perp.sample(i), act.sample(i), act.sample(j)) as f64;
                h.as_mut_slice()[i * n + j] *= c * inv_m;
            }
        }
        Ok(h)
    }
}

/// S_i^⊥ is read off the initial weights of `net`.
pub fn pattern_sets(net: &TwoLayerNet, data: &DataSet, radius: f64) -> Result<PatternSets> {
    if !(radius > 0.0) {
        return Err(TwoLayerError::Parameter(format!("radius must be positive, got {radius}")));
    }
    let pre0 = net.w0().matmul_t(&data.x)?;
    Ok(PatternSets { radius, perp: ActivationBits::from_pre(&pre0, |p| p.abs() < radius) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramInfo {
    pub h_inf: DenseMatrix,
    pub h_k: DenseMatrix,
    pub h_perp_k: Option<DenseMatrix>,
    /// Extremes of H(k).
    pub lambda_max: f64,
    pub lambda_min: f64,
    /// λ_min(H^∞)
    pub lambda0: f64,
    /// ‖H^∞‖
    pub h_inf_norm: f64,
}

pub fn gram_info(net: &TwoLayerNet, data: &DataSet, sets: Option<&PatternSets>) -> Result<GramInfo> {
    let h_inf = gram_infinity(data)?;
    let h_k = gram_empirical(net, data)?;
    let (h_inf_norm, lambda0) = spectral_extremes(&h_inf)?;
    let (lambda_max, lambda_min) = spectral_extremes(&h_k)?;
    let h_perp_k = sets.map(|s| s.h_perp(net, data)).transpose()?;
    Ok(GramInfo { h_inf, h_k, h_perp_k, lambda_max, lambda_min, lambda0, h_inf_norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{gen_dataset, init_net};
    use numerics_core::{dot, RngStream};

    fn data_of(rows: &[Vec<f64>]) -> DataSet {
        DataSet::new(DenseMatrix::from_rows(rows).unwrap(), vec![0.0; rows.len()]).unwrap()
    }

    #[test]
    fn closed_form_entries() {
        let s = 0.75f64.sqrt();
        let data = data_of(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, s]]);
        let h = gram_infinity(&data).unwrap();
        assert_eq!(h[(0, 0)], 0.5);
        assert_eq!(h[(0, 1)], 0.0);
        assert!((h[(0, 2)] - 1.0 / 6.0).abs() < 1e-12);
        assert_eq!(h.max_asymmetry(), 0.0);
    }

    #[test]
    fn random_unit_rows_diagonal_and_range() {
        let data = gen_dataset(40, 6, 1.0, &mut RngStream::new(3)).unwrap();
        let h = gram_infinity(&data).unwrap();
        for i in 0..40 {
            assert_eq!(h[(i, i)], 0.5);
            for j in 0..40 {
                // t(π − arccos t)/(2π) bottoms out near −0.0893 on [−1, 0]
                assert!(h[(i, j)] > -0.0894 && h[(i, j)] <= 0.5);
                let t = dot(data.x.row(i), data.x.row(j));
                assert_eq!(h[(i, j)] >= 0.0, t >= 0.0);
            }
        }
    }

    #[test]
    fn empirical_small_cases() {
        let data = data_of(&[vec![1.0, 0.0], vec![0.6, 0.8]]);
        let net = TwoLayerNet::from_parts(DenseMatrix::from_rows(&[vec![1.0, 1.0]]).unwrap(), vec![1.0]).unwrap();
        let h = gram_empirical(&net, &data).unwrap();
        assert!((h[(0, 1)] - 0.6).abs() < 1e-15);
        let dead = TwoLayerNet::from_parts(DenseMatrix::from_rows(&[vec![-1.0, 0.0]]).unwrap(), vec![1.0]).unwrap();
        let data2 = data_of(&[vec![1.0, 0.0], vec![-0.6, 0.8]]);
        let h = gram_empirical(&dead, &data2).unwrap();
        assert_eq!(h.row(0), &[0.0, 0.0]);
    }

    #[test]
    fn empirical_matches_direct_sum() {
        let data = gen_dataset(9, 4, 1.0, &mut RngStream::new(4)).unwrap();
        let net = init_net(130, 4, &mut RngStream::new(5)).unwrap();
        let h = gram_empirical(&net, &data).unwrap();
        let pre = net.preactivations(&data).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                let xx: f64 = data.x.row(i).iter().zip(data.x.row(j)).map(|(a, b)| a * b).sum();
                let c = (0..130).filter(|&r| pre[(r, i)] >= 0.0 && pre[(r, j)] >= 0.0).count() as f64;
                assert!((h[(i, j)] - xx * c / 130.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn pattern_set_limits() {
        let data = gen_dataset(6, 3, 1.0, &mut RngStream::new(6)).unwrap();
        let net = init_net(50, 3, &mut RngStream::new(7)).unwrap();
        let tiny = pattern_sets(&net, &data, 1e-300).unwrap();
        assert_eq!(tiny.total_perp(), 0);
        assert!(tiny.h_perp(&net, &data).unwrap().as_slice().iter().all(|&v| v == 0.0));
        let huge = pattern_sets(&net, &data, 1e6).unwrap();
        assert_eq!(huge.total_perp(), 6 * 50);
        let h = gram_empirical(&net, &data).unwrap();
        assert_eq!(huge.h_perp(&net, &data).unwrap(), h);
        assert_eq!(huge.stable_size(0), 0);
    }

    #[test]
    fn perp_fraction_near_gaussian_density() {
        let data = gen_dataset(20, 10, 1.0, &mut RngStream::new(8)).unwrap();
        let net = init_net(5000, 10, &mut RngStream::new(9)).unwrap();
        let sets = pattern_sets(&net, &data, 0.01).unwrap();
        let frac = sets.total_perp() as f64 / (20.0 * 5000.0);
        // P(|N(0,1)| < 0.01) ≈ 0.00798
        assert!((frac / 0.00798 - 1.0).abs() < 0.3, "{frac}");
    }

    #[test]
    fn info_extremes() {
        let data = gen_dataset(15, 5, 1.0, &mut RngStream::new(1)).unwrap();
        let net = init_net(400, 5, &mut RngStream::new(2)).unwrap();
        let info = gram_info(&net, &data, None).unwrap();
        assert!(info.lambda0 > 0.0 && info.lambda0 <= info.h_inf_norm);
        assert!(info.lambda_min >= -1e-12 && info.lambda_min <= info.lambda_max);
    }
}
