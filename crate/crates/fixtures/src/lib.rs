//! Reference oracles and canned fixtures for testing chainrisk.
//!
//! The [`oracle`] and [`recount`] modules recompute indices and windowed
//! metrics directly from their definitions and share no code with the
//! engine. [`fixture_logs`] regenerates the bundled event logs from the
//! seeds pinned in `fixtures/manifest.json`.

pub mod manifest;
pub mod oracle;
pub mod random;
pub mod recount;
pub mod replay;

use chainrisk_core::batch::Execution;
use chainrisk_core::sim::{run_events, SimError};
use chainrisk_core::telemetry::TelemetryEvent;

pub use manifest::{FixtureEntry, Manifest, Ruleset};
pub use replay::{replay, Replay};

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("bad manifest: {0}")]
    Manifest(String),
    #[error("unknown fixture `{0}`")]
    Unknown(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

pub struct FixtureLog {
    pub entry: FixtureEntry,
    pub events: Vec<TelemetryEvent>,
}

pub fn generate(entry: &FixtureEntry) -> Result<Vec<TelemetryEvent>, FixtureError> {
    let file = entry.scenario()?;
    Ok(run_events(file.config, &file.scenarios, entry.slots)?)
}

/// Every manifest fixture, generated concurrently.
pub fn fixture_logs() -> Result<Vec<FixtureLog>, FixtureError> {
    let manifest = Manifest::bundled()?;
    Execution::default()
        .map(&manifest.fixtures, |entry| {
            generate(entry).map(|events| FixtureLog {
                entry: entry.clone(),
                events,
            })
        })
        .into_iter()
        .collect()
}

pub fn fixture_log(name: &str) -> Result<FixtureLog, FixtureError> {
    let manifest = Manifest::bundled()?;
    let entry = manifest
        .get(name)
        .ok_or_else(|| FixtureError::Unknown(name.into()))?
        .clone();
    let events = generate(&entry)?;
    Ok(FixtureLog { entry, events })
}
