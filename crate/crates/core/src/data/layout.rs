//! File naming inside a data directory.

use std::path::{Path, PathBuf};

use super::Condition;
use crate::error::{Error, Result};

pub fn emg_path(dir: &Path, cond: &Condition, trial: usize) -> PathBuf {
    dir.join(format!("{}_t{trial:02}_emg.csv", cond.label()))
}

pub fn markers_path(dir: &Path, cond: &Condition, trial: usize) -> PathBuf {
    dir.join(format!("{}_t{trial:02}_markers.csv", cond.label()))
}

pub fn truth_path(dir: &Path, cond: &Condition, trial: usize) -> PathBuf {
    dir.join(format!("{}_t{trial:02}_truth.csv", cond.label()))
}

pub fn rest_path(dir: &Path, cond: &Condition) -> PathBuf {
    dir.join(format!("{}_rest_emg.csv", cond.label()))
}

/// Sorted trial numbers with an EMG file for `cond`.
pub fn discover_trials(dir: &Path, cond: &Condition) -> Result<Vec<usize>> {
    let entries = std::fs::read_dir(dir).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingInput(dir.display().to_string()),
        _ => Error::io(dir, e),
    })?;
    let prefix = format!("{}_t", cond.label());
    let mut trials = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(num) = name
            .strip_prefix(&prefix)
            .and_then(|r| r.strip_suffix("_emg.csv"))
        {
            if let Ok(t) = num.parse() {
                trials.push(t);
            }
        }
    }
    trials.sort_unstable();
    Ok(trials)
}
