//! Efficient-coding structure learning for sparse deep networks.
//!
//! The pipeline has three stages:
//!
//! 1. [`sparsecode`] learns overcomplete dictionaries with group-sparse
//!    coding (FISTA encoder, projected-gradient dictionary updates).
//! 2. [`structlearn`] stacks dictionary layers greedily, thresholds each
//!    dictionary into a binary connectivity mask, and stops when the
//!    coding-entropy gain of another layer falls below a tolerance.
//! 3. [`netprime`] turns the learned masks and weights into a sparse
//!    feed-forward network and fine-tunes it with mask-constrained
//!    backpropagation.
//!
//! [`infotheory`] provides the nearest-neighbor entropy estimator that
//! drives the depth-stopping rule, and [`dataio`] the matrix container,
//! image ingestion, whitening, and tensor serialization that everything
//! else sits on.

pub mod cli;
pub mod dataio;
pub mod error;
pub mod infotheory;
pub mod netprime;
pub mod rng;
pub mod sparsecode;
pub mod structlearn;

pub use error::{EffcodeError, Result};
