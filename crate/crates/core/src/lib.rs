//! Simulation core for class-(Sigma) submartingales `X = N + A`, the
//! sigma-finite measure `Q` attached to them, and the martingales `M^f`.
//!
//! The crate is `no_std` (it needs `alloc`). Parallel execution, file formats
//! and the command line live in the `sigma-lab` crate.

#![no_std]
// Validation is written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod decompose;
pub mod engine;
pub mod error;
pub mod models;
pub mod pathfunc;
pub mod penalise;
pub mod qcalc;
pub mod quad;
pub mod weight;

pub use engine::{derive_seed, pairwise_sum, Engine, Executor, McEstimate, PathValues, Sequential, TimeGrid};
pub use error::{Error, Result};
pub use models::{LevyModel, ModelFlags, PathBundle, SigmaModel, SupportCheck};
pub use weight::WeightFn;
