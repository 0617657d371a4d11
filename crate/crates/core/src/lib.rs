//! Finite-volume solvers for hyperbolic systems of conservation laws on
//! structured 1D and 2D grids.
//!
//! Two algorithm families share one set of Riemann solvers: the classic
//! second-order wave-propagation scheme with wave limiters
//! ([`classic`]) and the WENO / SSP Runge–Kutta method of lines
//! ([`sharpclaw`]). The [`controller`] drives time stepping and output and
//! [`parallel`] runs the same kernels on a tiled domain with ghost-cell
//! exchange.

// `!(x > 0.0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geometry;
pub mod riemann;
pub mod classic;
pub mod controller;
pub mod sharpclaw;
pub mod parallel;
pub mod wenogen;
pub mod apps;

mod error;
pub use error::{Error, Result};
