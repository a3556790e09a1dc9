//! Channel simulation, energy metrics and experiment harness for the
//! relay-aided OFDM allocation solvers in `dfrelay-core`.

// `!(x > 0.0)` is used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod experiment;
pub mod instances;
pub mod io;
pub mod metrics;

pub use error::{Error, Result};
