use std::path::Path;

use serde::{Deserialize, Serialize};

use super::split::SplitBoundaries;
use super::window::{PhaseTag, WindowStats};
use super::DataError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DayFile {
    pub day: i64,
    pub file: String,
    pub flights: usize,
    pub points: usize,
}

/// Dataset summary written next to the data files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub flights: usize,
    pub points: usize,
    pub files: Vec<DayFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitBoundaries>,
    /// window statistics per split name
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub windows: Vec<(String, WindowStats)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub phases: Vec<(String, Vec<(PhaseTag, usize)>)>,
    /// tracks dropped for being shorter than one window
    #[serde(default)]
    pub dropped_short: usize,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn write(&self, path: &Path) -> Result<(), DataError> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| DataError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    pub fn read(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(|e| DataError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Ok(serde_json::from_str(&text)?)
    }
}
