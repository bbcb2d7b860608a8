//! Schwarz-preconditioned quasi-Newton training of physics-informed networks.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod checkpoint;
pub mod container;
pub mod error;
pub mod experiment;
pub mod jet;
pub mod metrics;
pub mod network;
pub mod objective;
pub mod optimizer;
pub mod partition;
pub mod problems;
pub mod reference;
pub mod sampling;
pub mod spqn;
pub mod training;

pub use error::{Error, Result};
