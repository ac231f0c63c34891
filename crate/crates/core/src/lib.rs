//! Option-implied discount factors, OIS carry gaps, path-risk regressors and
//! the regression/validation machinery built on them.

pub mod config;
pub mod econometrics;
pub mod error;
pub mod features;
pub mod implied_discount;
pub mod market_data;
pub mod ois_curve;
pub mod pipeline;
pub mod synth;
pub mod validation;

pub use error::{Error, ErrorKind, Result};
