//! Decentralized gradient tracking with uncoordinated step-sizes.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: stacked iterate matrices and the (semi)norms used by the
//!   convergence analysis, including λ-weighted ergodic norms.
//! - [`network`]: undirected graphs, Metropolis mixing matrices, the
//!   consensus contraction factor δ and time-varying graph sequences.
//! - [`objectives`]: local objectives (quadratic, least squares, Huber with
//!   ridge), their smoothness profiles and a centralized reference solver.
//! - [`solvers`]: ATC-DIGing, DIGing, step-size schedules, traced runs and
//!   the inexact gradient descent harness.
//! - [`rates`]: closed-form step-size intervals, rates, small-gain gains and
//!   empirical checkers that compare runs against them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod network;
pub mod objectives;
pub mod rates;
pub mod solvers;

pub use error::{Error, Result};
pub use linalg::{ErgodicNormParams, NormKind, StackedMatrix};
pub use network::{Graph, GraphSequence, MixingMatrix};
pub use objectives::{ProblemInstance, ProblemKind, ReferenceSolution, SmoothnessProfile};
pub use solvers::{Algorithm, RunOptions, RunTrace, SolverState, StepSizeSchedule};
