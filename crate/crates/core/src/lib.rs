//! Detuned nonlinear Jaynes-Cummings dynamics of a trapped ion.
//!
//! The crate evolves the vibronic state exactly, generates shot-noise readout
//! of the excited-state population `σ₂₂`, and extracts from such data the
//! expectation value of the explicitly time-dependent interaction Hamiltonian
//! and of its partly time-integrated non-equal-time commutator.

pub mod analytics;
pub mod error;
pub mod estimation;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod propagator;
pub mod sampling;

pub use error::{Error, Result};
