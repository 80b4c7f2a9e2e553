//! Cooperative spectrum sensing over α-κ-μ fading with SVM classifiers at
//! the fusion center.

// NaN-rejecting range checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod fusion;
pub mod numerics;
pub mod rng;
pub mod sensing;
pub mod svm;

pub use error::{Error, Result};
