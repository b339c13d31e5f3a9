//! Structured-grid semi-Lagrangian solver for stationary Hamilton-Jacobi
//! equations from exit-time optimal control and differential games, with
//! boundary decomposition into independent sub-domains and a parallel
//! coarse-to-fine pipeline that solves the sub-problems concurrently.
//!
//! The crate is organized around the pipeline stages:
//!
//! - [`grid`]: rectangular lattices, node classification, bilinear
//!   interpolation;
//! - [`problems`]: dynamics/cost definitions and the built-in benchmark
//!   instances;
//! - [`solver`]: the fixed-point operator and masked value iteration;
//! - [`decomposition`]: boundary partitions, penalized auxiliary problems,
//!   minimum reconstruction and sub-domain masks;
//! - [`twogrid`]: coarse-grid reconstruction, mask projection and the
//!   parallel fine solve (the CLI `isa` command);
//! - [`analysis`]: error norms, closed-form oracles and benchmark tables;
//! - [`io`]: text formats (field dumps, PGM masks, CSV rows);
//! - [`cli`]: the command-line front end.

// negated comparisons like `!(x > 0.0)` are deliberate: they reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod decomposition;
pub mod error;
pub mod grid;
pub mod io;
pub mod problems;
pub mod solver;
pub mod twogrid;
pub mod util;

pub use error::{Error, Result};
