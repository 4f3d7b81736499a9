//! Exact and numeric building blocks for sub-Riemannian spectral invariants.
//!
//! The crate is `no_std` and only needs an allocator. Polynomial frames carry
//! exact rational coefficients, so flag and weight computations never depend on
//! floating-point zero tests. Numeric parts (volumes, spectra, expansions) are
//! written so that every reduction has a fixed order and results are bit-stable.
#![no_std]
#![forbid(unsafe_code)]
#![warn(missing_docs)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
pub mod expand;
pub mod flag;
pub mod linalg;
pub mod models;
pub mod nilpotent;
pub mod numeric;
pub mod polyfield;
pub mod strata;
pub mod volume;

pub use error::{Error, Result};
pub use polyfield::{BracketWord, Frame, MultiPoly, PolyVectorField, Rational};
