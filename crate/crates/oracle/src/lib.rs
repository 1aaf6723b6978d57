//! Brute-force reference computations for the `mbqv-core` test suites.
//!
//! Everything here is deliberately naive: dense state vectors and density
//! matrices on physical sites, plain Monte Carlo, no Pauli-frame algebra.

pub mod dense;
pub mod haar;
pub mod pattern;
pub mod rounding;
