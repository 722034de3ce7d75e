//! Bicausal optimal transport between finite-state Markov chains.
//!
//! ```
//! use bicausal::bicausal_dp::{value_iterate, ProblemSpec};
//! use bicausal::chain::validate_kernel;
//!
//! let p = validate_kernel(&[[0.9, 0.1], [0.2, 0.8]]).unwrap();
//! let spec = ProblemSpec::coupling_time(p, 0, 1).unwrap();
//! let report = value_iterate(&spec, 1e-12, 100_000).unwrap();
//! assert!((report.value_at(0, 1) - 10.0 / 3.0).abs() < 1e-9);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bicausal_dp;
pub mod chain;
pub mod cli;
pub mod concentration;
pub mod couplings;
pub mod error;
pub mod exact_ot;
pub mod noncausal;
pub mod simulate;

pub use error::{Error, Result};
