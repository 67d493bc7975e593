//! Frequency-domain multichannel active noise control with exterior
//! radiation suppression.
//!
//! The crate provides the free-field acoustic model (`acoustics`), the
//! generalized Stiefel manifold on which the radiation-constrained control
//! filter lives (`manifold`), the three adaptive update laws (`algorithms`)
//! and an experiment harness that reproduces single runs, calibrations,
//! frequency sweeps and the amplitude-switch experiment (`harness`).

// `!(x > 0.0)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acoustics;
pub mod algorithms;
pub mod cxla;
pub mod error;
pub mod exec;
pub mod harness;
pub mod manifold;
pub mod specfun;

pub use error::{Error, Result};
pub use num_complex::Complex64;
