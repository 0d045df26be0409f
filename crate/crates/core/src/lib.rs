//! Training dynamics and implicit-bias machinery for diagonal linear networks.
//!
//! The predictor is `β = w₊^p − w₋^p` trained on the quadratic loss
//! `L(β) = ‖Xβ − y‖² / (4n)`. This crate simulates gradient descent, SGD and
//! the stochastic gradient flow (SGF) on that parametrization, solves the
//! hyperbolic-entropy problem that predicts where they converge, and evaluates
//! the Lyapunov and concentration quantities that bound the stochastic runs.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is off;
//! floating-point special functions then come from `libm`.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod bias;
pub mod diagnostics;
pub mod dynamics;
mod error;
pub mod linalg;
pub mod math;
pub mod model;
pub mod rng;

pub use error::{Error, Result};
