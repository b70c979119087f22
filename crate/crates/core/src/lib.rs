//! Simulation toolkit for exchange-free quantum communication.
//!
//! The crate is layered bottom-up:
//!
//! * [`qstate`]: sparse complex amplitudes over labelled path/polarization/control bases.
//! * [`optics`]: optical elements and time-stamped circuit schedules, including the
//!   nested-interferometer circuit used for the "where was the photon" analysis.
//! * [`cqze`]: chained quantum Zeno evolution and the two-rail counterfactual CNOT.
//! * [`counterport`]: the two-round qubit transport protocol, Bloch-sphere averaging
//!   and the `(M, N)` fidelity sweep.
//! * [`analysis`]: two-state-vector weak values, weak probes and consistent histories.
//! * [`export`]: CSV, JSON and SVG emitters (and their parsers) for sweep grids and reports.

pub mod analysis;
pub mod counterport;
pub mod cqze;
pub mod error;
pub mod export;
pub mod optics;
pub mod qstate;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Tolerance used for every probability-conservation check.
pub const CONSERVATION_TOL: f64 = 1e-12;
