//! Digital twin of a photon-number-resolving detection chain built on
//! silicon photomultipliers: light sources, detector response and waveform
//! synthesis, a software model of the FPGA pulse-processing firmware,
//! pulse-height spectra and quantum-statistics estimators.
//!
//! Random draws use a counter-based stream keyed by (seed, purpose, event),
//! so ensembles are identical whatever the order or parallelism of
//! generation.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dsp_pipeline;
pub mod error;
pub mod photon_sources;
pub mod quantum_stats;
pub mod rng;
pub mod sipm_model;
pub mod special;
pub mod spectra;

pub use error::{Error, Result};
