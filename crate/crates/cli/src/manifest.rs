use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::CliError;

/// Written next to every run's outputs. `config` is the fully resolved
/// configuration (seed included); passing the manifest back through
/// `--config` reruns the command to byte-identical outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub trials: Option<usize>,
    pub started_at: String,
    pub finished_at: String,
    /// Set when a point-mass margin is in use; it lies outside the
    /// sub-gaussian setting the bounds assume.
    pub point_mass_margin: bool,
    pub outputs: Vec<PathBuf>,
    pub config: Config,
}

pub fn timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::Runtime(e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
    }
}
