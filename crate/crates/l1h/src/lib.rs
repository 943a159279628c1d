//! Sparse least-squares solving by proximal gradient with homotopy
//! continuation, together with the brute-force oracles that certify it and a
//! seeded benchmark harness.
//!
//! The objective is `0.5 ||A x - b||^2 + lambda ||x||_1` over dense
//! instrumented operators. Module map:
//!
//! - [`problem`]: dense matrices, product-counting operators, instances, and
//!   solver configuration.
//! - [`prox`]: soft thresholding, the prox step with its local model value
//!   and gradient mapping, and the optimality residue.
//! - [`solver`]: adaptive line search, the inner proximal-gradient loop, and
//!   the continuation driver with warm starts.
//! - [`analysis`]: restricted eigenvalues by support enumeration, the
//!   spectral norm by power iteration, an exact tiny-instance minimizer by
//!   sign-pattern enumeration, and the recovery assumption diagnostic.
//! - [`experiments`]: seeded instance generation and comparison/recovery
//!   benchmark drivers.
//! - [`io`], [`report`]: problem file round-tripping and deterministic
//!   CSV/JSON output.

pub mod analysis;
pub mod error;
pub mod experiments;
pub mod io;
pub mod problem;
pub mod prox;
pub mod report;
pub mod solver;

mod vec_util;

pub use error::{Error, Result};
pub use problem::{CountingOperator, DenseMatrix, ProblemInstance, SolverConfig};
pub use solver::{homotopy, prox_grad, solve_pg, SolveResult, SolveStatus};
