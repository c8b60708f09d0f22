//! Experiment orchestration for the photon-number-resolving chain twin:
//! run configuration, seeded end-to-end simulation, spectrum and statistics
//! analysis, and the figure presets behind the `pnrtwin` binary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod sim;

pub use error::{HarnessError, Result};
