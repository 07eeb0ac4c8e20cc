//! Run manifest and per-trial metadata.

use std::path::Path;

use fesim::analysis::PeriodSet;
use fesim::muscle::Calibration;
use fesim::trial::Condition;
use serde::{Deserialize, Serialize};

use crate::error::{data, Result};
use crate::files::{read, sha256_hex};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRef {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileRef {
    pub fn of(name: &str, bytes: &[u8]) -> Self {
        Self { name: name.into(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialEntry {
    pub subject: usize,
    pub condition: Condition,
    pub level: f64,
    /// Directory relative to the run root.
    pub dir: String,
    pub files: Vec<FileRef>,
}

impl TrialEntry {
    pub fn has(&self, name: &str) -> bool {
        self.files.iter().any(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timestamps {
    pub created: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub config_file: String,
    pub config_hash: String,
    pub seed: u64,
    pub subjects: usize,
    pub conditions: Vec<Condition>,
    pub levels: Vec<f64>,
    pub timestamps: Timestamps,
    pub trials: Vec<TrialEntry>,
    /// Hash over every trial file hash in manifest order.
    pub content_hash: String,
}

impl RunManifest {
    pub fn content_hash(trials: &[TrialEntry]) -> String {
        let mut s = String::new();
        for t in trials {
            for f in &t.files {
                s.push_str(&format!("{}/{} {}\n", t.dir, f.name, f.sha256));
            }
        }
        sha256_hex(s.as_bytes())
    }

    /// Checks that the config and every listed file exist with the recorded
    /// hashes.
    pub fn verify(&self, root: &Path) -> Result<()> {
        let cfg = read(&root.join(&self.config_file))?;
        if sha256_hex(&cfg) != self.config_hash {
            return Err(data(format!("{} does not match the manifest hash", self.config_file)));
        }
        for t in &self.trials {
            for f in &t.files {
                let p = root.join(&t.dir).join(&f.name);
                if !p.exists() {
                    return Err(data(format!("missing trial file {}/{}", t.dir, f.name)));
                }
                if sha256_hex(&read(&p)?) != f.sha256 {
                    return Err(data(format!("trial file {}/{} does not match the manifest hash", t.dir, f.name)));
                }
            }
        }
        if Self::content_hash(&self.trials) != self.content_hash {
            return Err(data("manifest content hash is inconsistent"));
        }
        Ok(())
    }
}

/// Scalar results of one trial, stored as `trial.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMeta {
    pub subject: usize,
    pub condition: Condition,
    pub level: f64,
    pub duration: f64,
    pub periods: PeriodSet,
    pub seed: u64,
    pub mvc_n: f64,
    /// Mean force over the calibration window as a fraction of MVC.
    pub initial_force: f64,
    pub stim_amplitude_ma: Option<f64>,
    pub calibration: Option<Calibration>,
    pub vector_strength: Option<f64>,
    pub units: usize,
    pub active_units: usize,
    pub total_spikes: usize,
    pub force_sample_rate: f64,
    pub excerpt_start: f64,
}

/// Known artifact onsets of a contaminated excerpt, seconds from its start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEvents {
    pub protocol: String,
    pub event_times: Vec<f64>,
}

pub fn trial_dir(subject: usize, condition: Condition, level: f64) -> String {
    format!("subject-{subject:02}/{}-{level:.2}", condition.as_str())
}
