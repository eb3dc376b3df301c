//! Passive islanding detection from synthetic three-phase measurements.

pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod kernels;
pub mod lstm;
pub mod model;
pub mod params;
pub mod seed;
pub mod signal;
pub mod tensor;
pub mod train;
pub mod unet;
pub mod wavenet;

pub use error::{Error, Result};
pub use tensor::Tensor;
