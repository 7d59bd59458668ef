//! From-scratch dense-matrix neural network regression with classical
//! baselines, built for reproducible experiments: deterministic kernels,
//! explicit backward passes, and checksummed checkpoints.

pub mod baselines;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod model;
pub mod nn;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
