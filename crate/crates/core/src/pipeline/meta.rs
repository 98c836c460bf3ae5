use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::tsv::sha256_hex;

use super::PipelineError;

/// What a stage read and wrote, stored next to its artifacts as
/// `<stage>.meta` (JSON). The only place timestamps appear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub stage: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    /// Input name to sha256 of its contents.
    pub inputs: BTreeMap<String, String>,
    /// Artifact file name to sha256 of its contents.
    pub outputs: BTreeMap<String, String>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub tool_version: String,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or_default()
}

impl RunRecord {
    pub fn read(path: &Path) -> Result<Option<Self>, PipelineError> {
        let bytes = match std::fs::read(path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(PipelineError::io(path, e)),
        };
        serde_json::from_slice(&bytes)
            .map(Some)
            .map_err(|e| PipelineError::Data(format!("{}: unreadable run record: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<(), PipelineError> {
        let mut text = serde_json::to_string_pretty(self).expect("run record serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| PipelineError::io(path, e))
    }
}

pub fn hash_file(path: &Path) -> Result<String, PipelineError> {
    std::fs::read(path)
        .map(|b| sha256_hex(&b))
        .map_err(|e| PipelineError::io(path, e))
}
