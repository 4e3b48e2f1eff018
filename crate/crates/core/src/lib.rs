//! Few-boson harmonic-trap quench numerics.
//!
//! Exact diagonalization of contact-interacting bosons in a one-dimensional
//! harmonic trap, the work statistics generated by a sudden change of the trap
//! frequency, and time-resolved and time-averaged squared commutators of the
//! canonical operators.
//!
//! The crate is `no_std` (it needs `alloc`); file formats, caching and the
//! command-line front end live in the `osc` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod fock;
pub mod fmath;
pub mod hobasis;
pub mod linalg;
pub mod otoc;
pub mod quench;
pub mod scaling;
pub mod spectral;
pub mod twobody;

pub use error::{Error, Result};
