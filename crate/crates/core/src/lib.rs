//! Clock-mode dilation of non-autonomous linear dynamics, with
//! Schrödingerisation for non-unitary generators and Hermite–Galerkin
//! emulation of the continuous modes.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clock;
pub mod complexity;
pub mod error;
pub mod galerkin;
pub mod harness;
pub mod krylov;
pub mod linalg;
pub mod operator;
pub mod oracles;
pub mod pde;
pub mod scalar;
pub mod schrodinger;
pub mod sparse;

pub use error::{Error, Result};
