//! Labeled downstream datasets.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    #[default]
    SingleLabel,
    MultiLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledItem {
    pub path: PathBuf,
    /// Exactly one class for single-label tasks; any subset for multi-label.
    pub labels: Vec<usize>,
}

impl LabeledItem {
    /// The class of a single-label item.
    pub fn label(&self) -> usize {
        self.labels[0]
    }

    pub fn multi_hot(&self, classes: usize) -> Vec<bool> {
        let mut v = vec![false; classes];
        for &l in &self.labels {
            v[l] = true;
        }
        v
    }
}

/// Train/test item lists plus the label space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledDataset {
    pub task: String,
    pub task_kind: TaskKind,
    pub num_classes: usize,
    pub train: Vec<LabeledItem>,
    pub test: Vec<LabeledItem>,
}

impl LabeledDataset {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 {
            return Err(Error::InvalidConfig(format!("{}: num_classes must be >= 1", self.task)));
        }
        for item in self.train.iter().chain(&self.test) {
            if let Some(&bad) = item.labels.iter().find(|&&l| l >= self.num_classes) {
                return Err(Error::InvalidArgument(format!(
                    "{}: label {bad} out of range [0, {})",
                    item.path.display(),
                    self.num_classes
                )));
            }
            if self.task_kind == TaskKind::SingleLabel && item.labels.len() != 1 {
                return Err(Error::InvalidArgument(format!(
                    "{}: single-label item carries {} labels",
                    item.path.display(),
                    item.labels.len()
                )));
            }
        }
        if self.train.is_empty() {
            return Err(Error::InvalidConfig(format!("{}: empty training split", self.task)));
        }
        Ok(())
    }
}

/// Reads and validates a dataset manifest; relative paths resolve against
/// the manifest's directory.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut ds: LabeledDataset = serde_json::from_str(&text)?;
    let base = path.parent().unwrap_or(Path::new(""));
    for item in ds.train.iter_mut().chain(ds.test.iter_mut()) {
        if item.path.is_relative() {
            item.path = base.join(&item.path);
        }
    }
    ds.validate()?;
    Ok(ds)
}

pub fn write_dataset(path: impl AsRef<Path>, ds: &LabeledDataset) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, serde_json::to_string_pretty(ds)?).map_err(|e| Error::io(path, e))
}
