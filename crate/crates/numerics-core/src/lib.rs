//! Dense linear algebra and seeded sampling shared by the testbeds.

mod eigen;
mod matrix;
mod rng;

pub use eigen::{eigenvalues_sym, spectral_extremes, sym_eigendecompose, SpectralDecomposition};
pub use matrix::{dot, norm_sq, normalize_rows, DenseMatrix};
pub use rng::{sample_gaussian_matrix, RngStream};

/// Symmetry tolerance on max |A_ij - A_ji|.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("no convergence after {iterations} iterations")]
    Convergence { iterations: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
}

pub type Result<T> = std::result::Result<T, NumericsError>;
