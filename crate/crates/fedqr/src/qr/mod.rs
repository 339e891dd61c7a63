//! Federated QR protocols over a [`Session`](crate::federation::Session).
//!
//! Three protocols share the same star topology but differ sharply in what
//! they put on the wire. [`fed_gram_schmidt`] exchanges nothing but additive
//! aggregates (norms, residual coefficients, R entries) and is the
//! production path. [`fed_householder`] and [`fed_givens`] are prototypes:
//! each contains at least one step that no additive scheme can hide (an
//! "oracle step"), and their transcripts are the attack surface exercised by
//! the [`attacks`](crate::attacks) module.

mod givens;
mod gram_schmidt;
mod householder;

pub use givens::{fed_givens, CrossRotation, GivensResult};
pub use gram_schmidt::{fed_gram_schmidt, FedQrResult};
pub use householder::{fed_householder, HouseholderResult};
