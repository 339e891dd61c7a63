//! Dense linear algebra used by the federated protocols.
//!
//! Everything here is generic over [`Scalar`] (any IEEE float; `f64` in the
//! protocols, `f32` works too). The module provides the three QR algorithms
//! the protocols federate, triangular solves, and a small one-sided Jacobi
//! SVD. All matrices are row-major and dense; the sizes in this crate are
//! modest (thousands of rows, tens of columns), so no sparsity or blocking
//! is attempted.

mod matrix;
mod qr;
mod solve;
mod svd;

use std::fmt;
use std::iter::Sum;

use num_traits::Float;
use thiserror::Error;

pub use matrix::{DenseMatrix, QrFactorization};
pub use qr::{
    apply_givens, givens_params, givens_qr, gram_schmidt_qr, householder_qr,
    householder_reflection, normalize_qr_signs, HouseholderStep,
};
pub use solve::{back_substitute, back_substitute_transpose, rank_tolerance};
pub use svd::{small_svd, Svd};

/// Scalar type the dense kernels are written against.
///
/// `num_traits::Float` supplies the arithmetic and comparisons; the extra
/// bounds let kernels accumulate with `sum()` and report values in errors.
pub trait Scalar: Float + num_traits::NumAssign + Sum<Self> + fmt::Debug + fmt::Display + 'static {
    /// Lossy conversion from `f64`, used for tolerance constants.
    fn from_f64(v: f64) -> Self {
        Self::from(v).expect("finite f64 constant must convert")
    }
}

impl<T> Scalar for T where
    T: Float + num_traits::NumAssign + Sum<T> + fmt::Debug + fmt::Display + 'static
{
}

/// Failures of the dense kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    /// A constructor was handed dimensions that do not match the data.
    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    /// Matrices must have at least one row and one column.
    #[error("empty matrix: {rows}x{cols}")]
    EmptyMatrix { rows: usize, cols: usize },
    /// A NaN or infinity was found on construction.
    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    /// Two operands disagree on a shared dimension.
    #[error("dimension mismatch: left is {left_rows}x{left_cols}, right is {right_rows}x{right_cols}")]
    DimensionMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    /// A reflection column was identically zero.
    #[error("zero column {col}: no reflection direction")]
    ZeroColumn { col: usize },
    /// A factorization met linearly dependent columns.
    #[error("rank deficient at column {col}")]
    RankDeficient { col: usize },
    /// Row indices passed to a rotation were out of range or not ordered.
    #[error("index out of range: ({i}, {j}) for {rows} rows")]
    IndexOutOfRange { i: usize, j: usize, rows: usize },
    /// A triangular solve met a diagonal entry below the rank tolerance.
    #[error("singular diagonal at index {index}")]
    SingularDiagonal { index: usize },
    /// The SVD expects a square input.
    #[error("not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
}
