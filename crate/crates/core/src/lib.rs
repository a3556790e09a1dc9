//! Sum-rate maximizing resource allocation for an OFDM link aided by
//! multiple decode-and-forward relays.
//!
//! Every subcarrier either runs in the direct mode (the source sends two
//! symbols over both time slots) or in the relay-aided mode, where the
//! source broadcasts in the first slot and a set of relays forwards
//! coherently in the second. The solvers in this crate pick the mode, the
//! assisting relay set and the power fractions of every device under
//! per-device sum-power constraints:
//!
//! - [`dual::solve_dual`] with [`dual::ModeSpec::Free`] runs the subgradient
//!   dual solver over the full mixed problem.
//! - [`iterative::solve_iterative`] runs coordinate ascent, alternating an
//!   optimal power allocation for fixed modes with per-subcarrier mode and
//!   cut updates.
//! - [`baseline::heuristic_ra`] is the uniform-power reference allocation.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod baseline;
pub mod dual;
mod error;
pub mod iterative;
mod linalg;
pub mod model;
pub mod persubcarrier;

pub use error::{Error, Result};
pub use model::{
    Allocation, ChannelGains, CoefficientPowers, Feasibility, Mode, RateReport, RelayOrder,
    SystemConfig,
};
pub use persubcarrier::{DualVector, SolutionCase, SubcarrierSolution};
