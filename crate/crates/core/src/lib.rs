//! Noise modelling for measurement-based quantum computing and its effect on
//! quantum volume.
//!
//! * [`pauli`]: Pauli algebra, Clifford conjugation, Pauli channels.
//! * [`mbqc`]: discrete-variable measurement patterns and their logical noise.
//! * [`gkp`]: GKP-encoded cluster states with finite squeezing and lossy
//!   homodyne detection.
//! * [`sim`]: state-vector and density-matrix simulation of compiled circuits.
//! * [`qv`]: the quantum volume protocol on top of the above.

pub mod error;
pub mod exec;
pub mod fmt;
pub mod gkp;
pub mod mbqc;
pub mod pauli;
pub mod qv;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
