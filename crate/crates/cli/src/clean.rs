//! `fesim clean`: artifact removal on a binary EMG record.

use std::path::{Path, PathBuf};

use fesim::config::ExperimentConfig;
use fesim::emg::EmgGridRecord;
use fesim::removal::{remove_hf, remove_lf, RemovalReport};
use serde::{Deserialize, Serialize};

use crate::error::{data, in_file, usage, Result};
use crate::files::{json_bytes, read, read_json, write};
use crate::manifest::ArtifactEvents;
use crate::Context;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Protocol {
    Lf,
    Hf,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Contaminated EMG record (binary).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    protocol: Protocol,
    /// Rest-state record used to fill LF windows; defaults to emg_rest.bin
    /// next to the input.
    #[arg(long)]
    baseline: Option<PathBuf>,
    /// Artifact-free version of the input, for ground-truth attenuation.
    #[arg(long, requires = "artifact")]
    reference: Option<PathBuf>,
    /// The artifact that was added to the input.
    #[arg(long, requires = "reference")]
    artifact: Option<PathBuf>,
    /// Known artifact onsets (JSON with event_times).
    #[arg(long)]
    events: Option<PathBuf>,
    /// Cleaned record; defaults to <input stem>.cleaned.bin.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Report; defaults to <input stem>.clean-report.json.
    #[arg(long)]
    report: Option<PathBuf>,
}

/// Summary written by `clean`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanReport {
    pub input: String,
    pub protocol: String,
    /// Artifact onsets known in advance; zero without ground truth.
    pub known_events: usize,
    pub ground_truth: bool,
    pub mean_attenuation_db: Option<f64>,
    pub mean_energy_reduction_db: f64,
    pub events_detected: usize,
    pub outliers_replaced: usize,
    pub notes: Vec<String>,
    pub removal: RemovalReport,
}

pub fn read_emg(path: &Path) -> Result<EmgGridRecord> {
    EmgGridRecord::read_binary(read(path)?.as_slice()).map_err(|e| in_file(path, e))
}

fn sibling(input: &Path, suffix: &str) -> PathBuf {
    let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "emg".into());
    input.with_file_name(format!("{stem}{suffix}"))
}

fn same_shape(a: &EmgGridRecord, b: &EmgGridRecord, what: &str) -> Result<()> {
    if a.layout.channels() != b.layout.channels() || a.len() != b.len() {
        return Err(data(format!("{what} does not match the input's channels or length")));
    }
    Ok(())
}

/// Cleans `input` and optionally scores it against ground truth.
pub fn clean_record(
    cfg: &ExperimentConfig,
    input: &EmgGridRecord,
    protocol: Protocol,
    baseline: Option<&EmgGridRecord>,
    truth: Option<(&EmgGridRecord, &EmgGridRecord)>,
) -> Result<(EmgGridRecord, RemovalReport)> {
    let (cleaned, mut report) = match protocol {
        Protocol::Lf => {
            let base = baseline.ok_or_else(|| usage("LF cleaning needs a rest baseline (--baseline)"))?;
            if base.layout.channels() != input.layout.channels() {
                return Err(data("baseline has a different channel count"));
            }
            remove_lf(input, &cfg.removal.lf, &base.channels, cfg.seed)?
        }
        Protocol::Hf => remove_hf(input, &cfg.removal.hf)?,
    };
    if let Some((reference, artifact)) = truth {
        same_shape(input, reference, "reference")?;
        same_shape(input, artifact, "artifact")?;
        report.attach_ground_truth(&cleaned, reference, &artifact.channels);
    }
    Ok((cleaned, report))
}

pub fn run(ctx: &Context, args: &Args) -> Result<()> {
    let input = read_emg(&args.input)?;
    let baseline = match (args.protocol, &args.baseline) {
        (Protocol::Lf, Some(p)) => Some(read_emg(p)?),
        (Protocol::Lf, None) => {
            let p = args.input.with_file_name("emg_rest.bin");
            if !p.exists() {
                return Err(usage("LF cleaning needs --baseline (no emg_rest.bin next to the input)"));
            }
            Some(read_emg(&p)?)
        }
        (Protocol::Hf, _) => None,
    };
    let truth = match (&args.reference, &args.artifact) {
        (Some(r), Some(a)) => Some((read_emg(r)?, read_emg(a)?)),
        _ => None,
    };
    let known_events = match &args.events {
        Some(p) => read_json::<ArtifactEvents>(p)?.event_times.len(),
        None => 0,
    };
    let (cleaned, removal) = clean_record(&ctx.config, &input, args.protocol, baseline.as_ref(), truth.as_ref().map(|(r, a)| (r, a)))?;

    let mut notes = Vec::new();
    if truth.is_none() {
        notes.push("no ground truth supplied: attenuation not computed".to_string());
    }
    if known_events == 0 {
        notes.push("no known artifact events: detections are unverified".to_string());
    }
    let n = removal.channels.len().max(1) as f64;
    let report = CleanReport {
        input: args.input.display().to_string(),
        protocol: removal.protocol.clone(),
        known_events,
        ground_truth: truth.is_some(),
        mean_attenuation_db: removal.mean_attenuation_db(),
        mean_energy_reduction_db: removal.channels.iter().map(|c| c.energy_reduction_db).sum::<f64>() / n,
        events_detected: removal.channels.iter().map(|c| c.events_detected).sum(),
        outliers_replaced: removal.channels.iter().map(|c| c.outliers_replaced).sum(),
        notes,
        removal,
    };
    let out = args.output.clone().unwrap_or_else(|| sibling(&args.input, ".cleaned.bin"));
    let mut b = Vec::new();
    cleaned.write_binary(&mut b).expect("in-memory write");
    write(&out, &b)?;
    let rp = args.report.clone().unwrap_or_else(|| sibling(&args.input, ".clean-report.json"));
    write(&rp, &json_bytes(&report))?;
    match report.mean_attenuation_db {
        Some(db) => println!("cleaned {} ({}): mean attenuation {db:.1} dB", out.display(), report.protocol),
        None => println!("cleaned {} ({}): no ground truth", out.display(), report.protocol),
    }
    Ok(())
}
