//! Streaming anonymization and re-identification evaluation for XR eye and
//! body telemetry.
//!
//! * [`telemetry`]: stream types, validation, resampling, windowing, CSV I/O.
//! * [`mechanisms`]: causal privacy mechanisms and their composition.
//! * [`metrics`]: utility degradation metrics.
//! * [`identifier`]: gallery/probe re-identification harness.
//! * [`sweep`]: privacy-utility sweeps, Pareto frontiers, operating points.
//! * [`datagen`]: chimera pairing and the synthetic population generator.

pub mod datagen;
pub mod error;
pub mod geometry;
pub mod identifier;
pub mod mechanisms;
pub mod metrics;
pub mod seed;
pub mod stats;
pub mod sweep;
pub mod telemetry;

pub use error::{Error, Result};
