//! Federated QR decomposition under additive secure aggregation.
//!
//! The crate simulates a star topology: `S` clients each hold a horizontal
//! block of a tall data matrix, an honest-but-curious aggregator combines
//! per-client messages, and every exchanged value is recorded in an ordered
//! [`federation::Transcript`]. On top of that sit three federated QR
//! protocols (Gram-Schmidt for production use, Householder and Givens as
//! deliberately leaky prototypes), transcript-only reconstruction attacks
//! against the prototypes, and two applications (PCA and linear regression)
//! built on the Gram-Schmidt path.
//!
//! Dense linear algebra is generic over the scalar type via [`linalg::Scalar`];
//! the protocol and aggregation layers work in `f64` because the fixed-point
//! encoding used for secret sharing is defined in terms of `f64` semantics.

pub mod apps;
pub mod attacks;
pub mod federation;
pub mod linalg;
pub mod qr;
pub mod reference;
pub mod smpc;
pub mod stats;
pub mod synth;

/// Dense row-major matrix with `f64` entries: the element type used by every
/// protocol in this crate.
pub type Matrix = linalg::DenseMatrix<f64>;

/// QR factorization of a [`Matrix`].
pub type Qr = linalg::QrFactorization<f64>;
