//! Risk monitoring for proof-of-stake networks.
//!
//! Telemetry from a live network or from the bundled simulator flows
//! through [`kri::KriEngine`] into KRI samples, which [`alert::AlertEngine`]
//! checks against rules and [`scoring::Scorer`] folds into a single risk
//! score.

pub mod alert;
pub mod batch;
pub mod kri;
pub mod scoring;
pub mod sim;
pub mod telemetry;
