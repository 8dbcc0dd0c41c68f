use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of a JSON Lines manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
    pub annotation: PathBuf,
    #[serde(default)]
    pub predictions: BTreeMap<String, PathBuf>,
    #[serde(default = "default_split")]
    pub split: String,
}

fn default_split() -> String {
    "test".to_string()
}

/// Dataset sample list. Relative paths resolve against `base_dir`, the
/// directory holding the manifest file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub dataset_id: String,
    pub base_dir: PathBuf,
    pub samples: Vec<SampleRecord>,
}

impl Manifest {
    pub fn new(
        dataset_id: impl Into<String>,
        base_dir: impl Into<PathBuf>,
        samples: Vec<SampleRecord>,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for s in &samples {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::DuplicateId(s.id.clone()));
            }
        }
        Ok(Manifest {
            dataset_id: dataset_id.into(),
            base_dir: base_dir.into(),
            samples,
        })
    }

    /// Parses a JSON Lines manifest. Blank lines are skipped; the dataset id
    /// is the file stem.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let dataset_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::parse(&text, dataset_id, base_dir)
    }

    pub fn parse(text: &str, dataset_id: impl Into<String>, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut samples = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: SampleRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            if !seen.insert(record.id.clone()) {
                return Err(Error::DuplicateId(record.id));
            }
            samples.push(record);
        }
        Ok(Manifest {
            dataset_id: dataset_id.into(),
            base_dir: base_dir.into(),
            samples,
        })
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for s in &self.samples {
            out.push_str(&serde_json::to_string(s)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = self.to_jsonl()?;
        let mut file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        file.write_all(text.as_bytes()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}
