//! Finite-time steering of the probability density of a reflected diffusion on `[0, 1]`.
//!
//! The density `y(x, t)` of an agent obeying `dZ = v(Z, t) dt + sqrt(2) dW + dψ`
//! (reflection `ψ` keeps `Z` in `[0, 1]`) solves the zero-flux Fokker-Planck problem
//!
//! ```text
//! y_t = y_xx - (v y)_x,     (y_x - v y)(0, t) = (y_x - v y)(1, t) = 0.
//! ```
//!
//! The crate discretizes that problem with a conservative, exponentially fitted
//! finite-volume scheme ([`pde`]), computes the spectral gap of the weighted
//! operators that govern convergence ([`spectral`]), synthesizes the bounded drift
//! fields that steer `y` onto a target density `f` in finite time ([`control`]),
//! and validates the result against particle simulations ([`particles`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod convergence;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod par;
pub mod particles;
pub mod pde;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{uniform_grid, DensitySpec, Grid, GridFunction, NormKind, Placement};
pub use par::Execution;
