//! Zeroth-order online optimization with lazy queries.
//!
//! The crate is organised around four pieces that plug together:
//!
//! - [`oracles`]: time-varying losses behind a metered query channel
//!   (counted toward query complexity) and an unmetered evaluation channel
//!   (used only for bookkeeping and diagnostics).
//! - [`estimators`]: one-point, residual, two-point and lazy-query (LAZO)
//!   gradient estimators, including the multi-point reuse variant.
//! - [`optimizer`]: the projected zeroth-order SGD driver producing a
//!   [`optimizer::Trajectory`].
//! - [`diagnostics`]: regret, variance traces, bound validators and the
//!   symmetry diagnostic for the lazy-query region.
//!
//! Monte Carlo loops and independent trials run on rayon when the
//! `parallel` feature is enabled (the default); see [`parallel`].

pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod numerics;
pub mod optimizer;
pub mod oracles;
pub mod parallel;

pub use error::{Error, Result};
