//! Stochastic characteristics for continuity and transport equations with
//! rough drifts.
//!
//! The crate simulates `du + div((b + dB/dt) u) = 0` and its transport
//! counterpart by composing the initial datum with the inverse of the
//! Euler–Maruyama flow of `dX = b(X) dt + dB`, and checks the quantitative
//! estimates that drive existence and uniqueness for such equations:
//! negative moments of the flow Jacobian, weighted `L^2` bounds, commutator
//! decay under mollification, Itô weak-form residuals and shared-noise
//! convergence of mollified problems.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod commutator;
pub mod error;
pub mod exec;
pub mod field;
pub mod flow;
pub mod grid;
pub mod paths;
pub mod report;
pub mod solution;
pub mod suites;
pub mod weakform;

mod quad;

pub use error::{Error, Result};
pub use field::{CutoffSpec, DriftField, MollifierKernel};
pub use grid::{Grid1, Grid2, GridFunction, GridFunction2};
pub use paths::{sample_brownian, BrownianEnsemble};
