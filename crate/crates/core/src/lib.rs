//! Split-operator simulation of coherent vibrational control in D2+.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod eigen;
pub mod error;
pub mod grid;
pub mod model;
pub mod molecule;
pub mod output;
pub mod parallel;
pub mod propagator;
pub mod pulse;
pub mod pump;
pub mod run;
pub mod scan;
pub mod spectrum;
pub mod spline;
pub mod units;

pub use error::{Error, Result};
