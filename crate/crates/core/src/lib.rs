// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod cost;
pub mod error;
pub mod planner;
pub mod pso;
pub mod reliability;
pub mod series;
pub mod sizing;
pub mod spectral;
pub mod stochastic;

pub use error::{Error, Result};
pub use series::TimeSeries;
