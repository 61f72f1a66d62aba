//! Calibration and Monte Carlo pricing of multi-event triggered
//! catastrophe bonds.

// `!(x > 0.0)` is the NaN-rejecting form used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dependence;
pub mod error;
pub mod frequency;
pub mod marginals;
pub mod optim;
pub mod par;
pub mod pricer;
pub mod rates;
pub mod rng;
pub mod special;
pub mod stats;
pub mod trigger;

pub use error::{Error, Result};
