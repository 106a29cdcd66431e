//! Customer-momentum research engine: linked-firm signals, quantile
//! portfolio sorts, factor construction and the Newey-West / Fama-MacBeth /
//! spanning-regression battery over monthly or daily security panels.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod econometrics;
pub mod error;
pub mod factors;
pub mod links;
pub mod panel;
pub mod period;
pub mod quantile;
pub mod report;
pub mod signals;
pub mod sorter;
pub mod study;
pub mod synth;

pub use error::{Error, Result};

/// Engine version embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
