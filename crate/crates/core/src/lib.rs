//! Core algorithms for data-driven building energy control.
//!
//! The crate covers the whole control pipeline as pure, allocation-only code:
//!
//! * [`plant`] — a synthetic multi-zone RC thermal network with a nonlinear
//!   HVAC power map, used as ground truth and closed-loop testbed.
//! * [`schedule`] — seeded weather / occupancy / setpoint schedule generators.
//! * [`dataset`] — min-max scaling, sliding-window supervised samples, splits.
//! * [`rnn`] — a recurrent surrogate (tanh cell + fully-connected head) with
//!   exact backpropagation-through-time for both weights and inputs.
//! * [`rc`] — the first-order RC baseline model fitted by least squares, and
//!   its MPC controller built on the same optimizer.
//! * [`barrier`] — the log-barrier reformulation of the finite-horizon input
//!   optimization problem and momentum gradient descent over setpoint plans.
//! * [`control`] — rolling-horizon closed-loop episodes and comparison
//!   metrics.
//!
//! Everything is deterministic for fixed seeds and `no_std`-compatible
//! (`alloc` required; transcendental math comes from `libm` when the `std`
//! feature is disabled). File formats, configuration, and the CLI live in the
//! companion `hvacopt` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("hvacopt-core needs either the `std` or the `libm` feature for f64 math");

pub mod barrier;
pub mod control;
pub mod dataset;
pub mod error;
mod float;
pub mod linalg;
pub mod plant;
pub mod profile;
pub mod rc;
pub mod rng;
pub mod rnn;
pub mod schedule;
pub mod schema;

pub use error::{Error, Result};
pub use linalg::Mat;
