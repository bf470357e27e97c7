use std::path::Path;

use serde::Deserialize;

use super::{DqnHyper, FdpgHyper, GrHyper};
use crate::error::Result;
use crate::model::toml_error;

/// Learner settings read from the `[gr]`, `[fdpg]` and `[dqn]` sections of a
/// configuration file. Absent sections or keys keep their defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub gr: GrHyper,
    pub fdpg: FdpgHyper,
    pub dqn: DqnHyper,
}

impl LearnerConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| toml_error(text, &e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}
