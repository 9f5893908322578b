//! The fixture manifest: which scenario file, seed and ruleset each fixture
//! uses and which rules it is expected to fire.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chainrisk_core::alert::RuleSet;
use chainrisk_core::sim::ScenarioFile;
use serde::{Deserialize, Serialize};

use crate::FixtureError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ruleset {
    /// One rule per indicator threshold table row.
    Table1,
    /// The service default: table rules plus finality and censorship.
    Default,
}

impl Ruleset {
    pub fn load(self) -> RuleSet {
        match self {
            Ruleset::Table1 => RuleSet::table1(),
            Ruleset::Default => RuleSet::default_rules(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub name: String,
    pub file: String,
    pub seed: u64,
    pub slots: u64,
    pub ruleset: Ruleset,
    pub expected_rules: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub fixtures: Vec<FixtureEntry>,
}

pub const MANIFEST_JSON: &str = include_str!("../../../fixtures/manifest.json");

/// Directory holding the scenario files and manifest.
pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

impl Manifest {
    pub fn bundled() -> Result<Self, FixtureError> {
        Self::from_json(MANIFEST_JSON)
    }

    pub fn from_json(text: &str) -> Result<Self, FixtureError> {
        serde_json::from_str(text).map_err(|e| FixtureError::Manifest(e.to_string()))
    }

    pub fn get(&self, name: &str) -> Option<&FixtureEntry> {
        self.fixtures.iter().find(|f| f.name == name)
    }
}

impl FixtureEntry {
    /// The scenario file with the manifest's pinned seed applied.
    pub fn scenario(&self) -> Result<ScenarioFile, FixtureError> {
        let path = fixtures_dir().join(&self.file);
        let mut file = ScenarioFile::load(&path)?;
        file.config.seed = self.seed;
        Ok(file)
    }
}
