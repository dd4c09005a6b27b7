//! Bayesian mixture of piecewise linear growth curves with unknown numbers of
//! random changepoints.

pub mod data;
pub mod dist;
pub mod error;
pub mod fit;
pub mod model;
pub mod postprocess;
pub mod priors;
pub mod sampler;
pub mod simulator;

pub use error::{PgmmError, Result};
