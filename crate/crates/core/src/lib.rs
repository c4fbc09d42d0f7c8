//! Second-quantized simulation of polarization-encoded linear-optical gates.
//!
//! States live in a Fock space over `(beam, polarization[, time bin])` modes.
//! Circuits are sequences of linear stages, ideal conditional flips, ancilla
//! sources, number-resolving detection with feed-forward, and post-selection.

pub mod analysis;
pub mod circuit;
pub mod engine;
pub mod error;
pub mod fock;
pub mod optics;

pub use error::{Error, Result};
pub use fock::{
    inner_product, prepare_logical_input, register_modes, FockBasisState, LogicalAmplitudes, ModeLabel,
    ModeRegistry, PhotonicState, Polarization, TimeBin, C64,
};
pub use optics::{compose, ElementSpec, ModeUnitary, Port};
