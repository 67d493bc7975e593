//! Small dense complex linear algebra.
//!
//! Sizes in this crate are tiny (at most a few dozen loudspeakers and a
//! handful of reference channels), so everything here is direct, allocation
//! friendly and deterministic for identical inputs on a given platform.

mod eig;
mod matrix;
mod qr;

pub use eig::{herm_eig, herm_sqrt, spectral_norm, sylvester_spd, HermitianFactorization};
pub use matrix::{inner, norm_sqr, quadratic_form, ComplexMatrix, ComplexVector};
pub use qr::{qr_positive, RANK_TOLERANCE};
