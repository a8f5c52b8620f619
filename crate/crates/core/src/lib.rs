//! Preconditioned proximal point (PPP) splitting and its reduced form (rPPP).
//!
//! The crate is organised bottom-up: [`linalg`] supplies dense numerics and
//! subspace algebra, [`monotone`] exposes operators through their resolvents,
//! [`ppp`] runs the iterations, [`methods`] assembles the four classic
//! splittings as PPP instances, [`limits`] predicts where they converge, and
//! [`analysis`] / [`experiments`] hold the spectral, factorization and
//! tomography studies.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
mod eigen;
mod decomp;
pub mod error;
pub mod experiments;
pub mod limits;
pub mod linalg;
pub mod methods;
pub mod monotone;
pub mod ppp;
pub mod sampling;

pub use error::{Error, Result};
