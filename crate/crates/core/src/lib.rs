// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Uplink multi-cell massive-MIMO under pilot contamination and channel
//! aging: channel sampling, linear receivers, closed-form rate bounds, the
//! deterministic equivalent and a reproducible Monte-Carlo driver.

pub mod analysis;
pub mod channel;
pub mod error;
pub mod linalg;
pub mod montecarlo;
pub mod receivers;
pub mod scenario;
pub mod validation;

pub use error::{Error, Result};
