//! Malliavin Monte Carlo pricing of American options under mean-field jump
//! diffusions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod fd;
pub mod levy;
pub mod localization;
pub mod model;
pub mod paths;
pub mod payoff;
pub mod pricer;
pub mod quadrature;
pub mod rng;
pub mod weights;

pub use error::{Error, Result};
