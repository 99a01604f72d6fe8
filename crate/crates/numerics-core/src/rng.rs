use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::{DenseMatrix, NumericsError, Result};

/// Seeded ChaCha20 stream. Sub-streams share the key and differ in the
/// ChaCha stream id, so replicates never overlap.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    counter: u64,
    rng: ChaCha20Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    fn with_stream(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, counter: 0, rng }
    }

    /// Independent stream for replicate `k`.
    pub fn substream(&self, k: u64) -> Self {
        Self::with_stream(self.seed, self.stream_id.wrapping_mul(1 << 20).wrapping_add(k + 1))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of draws taken so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn normal(&mut self) -> f64 {
        self.counter += 1;
        self.rng.sample(StandardNormal)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.counter += 1;
        lo + (hi - lo) * self.rng.random::<f64>()
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.counter += 1;
        self.rng.random_range(0..n)
    }

    /// Uniform ±1.
    pub fn sign(&mut self) -> f64 {
        self.counter += 1;
        if self.rng.random::<bool>() {
            1.0
        } else {
            -1.0
        }
    }

    pub fn normal_vec(&mut self, len: usize) -> Vec<f64> {
        (0..len).map(|_| self.normal()).collect()
    }
}

pub fn sample_gaussian_matrix(rows: usize, cols: usize, stream: &mut RngStream) -> Result<DenseMatrix> {
    if rows == 0 || cols == 0 {
        return Err(NumericsError::Dimension(format!("cannot sample a {rows}x{cols} matrix")));
    }
    DenseMatrix::new(rows, cols, stream.normal_vec(rows * cols))
}
