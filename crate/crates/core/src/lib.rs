//! Waveguide-QED laboratory for a single driven two-level emitter.
//!
//! The crate is split along the data flow of an extinction / photon
//! statistics experiment:
//!
//! - [`physics`]: closed-form line shapes, interference extinction, coupling
//!   figures, coherent-state amplitudes, `g²(τ)` models and a Bloch-equation
//!   oracle for two-time correlations.
//! - [`trajectory`]: quantum-jump simulation of the emitter producing
//!   time-tagged click streams behind a detector model.
//! - [`correlator`]: time-tag file formats, HBT correlation histograms and
//!   count-trace reduction.
//! - [`inference`]: damped Gauss-Newton fitting of every model and the
//!   derivation of cooperativity, beta factor and efficiency bounds.

pub mod correlator;
pub mod inference;
pub mod physics;
pub mod presets;
pub mod seeds;
pub mod trajectory;
pub mod units;

pub use num_complex::Complex64;
