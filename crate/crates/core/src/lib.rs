//! Exact (7/9)-approximate maximin-share allocation of indivisible goods.
//!
//! The crate works entirely in exact rationals. The main entry points are
//! [`allocator::run_alg`] (one run of the threshold allocator on an ordered
//! instance), [`fptas::run_fptas`] (threshold descent from truncated
//! proportional shares) and [`solve::solve`] (order, allocate, lift, report).
//! [`shares::mms_exact`] computes exact maximin shares for small instances and
//! serves as ground truth in tests and campaigns.

pub mod allocator;
pub mod error;
pub mod fptas;
pub mod harness;
pub mod model;
pub mod number;
pub mod shares;
pub mod solve;

pub use allocator::{run_alg, run_alg_with, AllocOptions, SolveOutcome};
pub use error::{Error, Result};
pub use fptas::{iteration_bound, run_fptas, FptasConfig, FptasOutcome};
pub use model::{lift_allocation, order_instance, scale_agent, Allocation, Instance, OrderedInstance, ThresholdVector};
pub use number::Rational;
pub use shares::{mms_exact, tps, OracleLimits};
