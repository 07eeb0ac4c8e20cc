//! `fesim analyze`: force and EMG metrics for every trial of a run.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use fesim::analysis::{normalized_rms, period_average, residual_force, smooth_force, PeriodSet, RmsTable, Smoothed};
use fesim::config::ExperimentConfig;
use fesim::dsp::correlation;
use fesim::muscle::ForceTrace;
use fesim::trial::Condition;
use serde::{Deserialize, Serialize};

use crate::clean::{clean_record, read_emg, Protocol};
use crate::error::{data, in_file, usage, Result};
use crate::files::{json_bytes, parallel_map, read, read_json, sha256_hex, timestamp, write};
use crate::manifest::{RunManifest, Timestamps, TrialEntry, TrialMeta, CONFIG_FILE, MANIFEST_FILE};
use crate::svg;
use crate::Context;

pub const ANALYSIS_DIR: &str = "analysis";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Run manifest; defaults to <out>/manifest.json.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

/// Mean and standard error across subjects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    /// Absent with a single subject.
    pub se: Option<f64>,
    pub n: usize,
}

impl MeanSe {
    pub fn of(v: &[f64]) -> Self {
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let se = (n > 1).then(|| (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64).sqrt() / (n as f64).sqrt());
        Self { mean, se, n }
    }
}

/// Artifact removal on the trial's contaminated excerpt, scored against
/// the clean excerpt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalSummary {
    pub protocol: String,
    pub mean_attenuation_db: Option<f64>,
    pub min_attenuation_db: Option<f64>,
    pub channels_over_20_db: usize,
    pub mean_correlation: f64,
    pub channels: usize,
    pub events_detected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialAnalysis {
    pub subject: usize,
    pub condition: Condition,
    pub level: f64,
    pub dir: String,
    pub mvc_n: f64,
    pub stim_amplitude_ma: Option<f64>,
    pub vector_strength: Option<f64>,
    pub periods: PeriodSet,
    /// Mean smoothed force per period, newtons.
    pub force_n: Vec<f64>,
    pub force_pct_mvc: Vec<f64>,
    pub initial_force_pct: f64,
    pub residual_force_pct: f64,
    /// Channel-mean segment RMS per period, millivolts.
    pub rms_mv: Vec<f64>,
    pub normalized_rms: Vec<f64>,
    pub removal: Option<RemovalSummary>,
}

impl TrialAnalysis {
    pub fn final_normalized_rms(&self) -> f64 {
        *self.normalized_rms.last().expect("at least one period")
    }
}

/// One condition at one level, summarized across subjects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub level: f64,
    pub condition: Condition,
    pub initial_force_pct: MeanSe,
    pub residual_force_pct: MeanSe,
    pub final_normalized_rms: MeanSe,
    pub stim_amplitude_ma: Option<MeanSe>,
    pub vector_strength: Option<MeanSe>,
    pub force_pct_mvc: Vec<MeanSe>,
    pub normalized_rms: Vec<MeanSe>,
    pub removal_attenuation_db: Option<MeanSe>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub tool_version: String,
    pub manifest_sha256: String,
    pub run_content_hash: String,
    pub timestamps: Timestamps,
    pub subjects: Vec<usize>,
    /// Configuration order.
    pub levels: Vec<f64>,
    pub conditions: Vec<Condition>,
    pub cells: Vec<CellSummary>,
    pub trials: Vec<TrialAnalysis>,
}

impl AnalysisReport {
    pub fn trial(&self, subject: usize, condition: Condition, level: f64) -> Option<&TrialAnalysis> {
        self.trials.iter().find(|t| t.subject == subject && t.condition == condition && (t.level - level).abs() < 1e-9)
    }
}

fn smoothed_csv(s: &Smoothed, mvc: f64) -> Vec<u8> {
    let mut out = String::from("time_s,force_n,force_pct_mvc\n");
    for (t, v) in s.times.iter().zip(&s.values) {
        out.push_str(&format!("{t},{v},{}\n", 100.0 * v / mvc));
    }
    out.into_bytes()
}

fn removal_summary(cfg: &ExperimentConfig, dir: &Path, condition: Condition) -> Result<RemovalSummary> {
    let dirty = read_emg(&dir.join("emg_contaminated.bin"))?;
    let reference = read_emg(&dir.join("emg_excerpt.bin"))?;
    let artifact = read_emg(&dir.join("emg_artifact.bin"))?;
    let baseline = read_emg(&dir.join("emg_rest.bin"))?;
    let protocol = if condition == Condition::Hf { Protocol::Hf } else { Protocol::Lf };
    let (cleaned, report) = clean_record(cfg, &dirty, protocol, Some(&baseline), Some((&reference, &artifact)))?;
    let att: Vec<f64> = report.channels.iter().filter_map(|c| c.attenuation_db).collect();
    let corr: Vec<f64> = cleaned.channels.iter().zip(&reference.channels).map(|(y, x)| correlation(y, x)).collect();
    Ok(RemovalSummary {
        protocol: report.protocol.clone(),
        mean_attenuation_db: report.mean_attenuation_db(),
        min_attenuation_db: att.iter().copied().reduce(f64::min),
        channels_over_20_db: att.iter().filter(|a| **a >= 20.0).count(),
        mean_correlation: corr.iter().sum::<f64>() / corr.len().max(1) as f64,
        channels: report.channels.len(),
        events_detected: report.channels.iter().map(|c| c.events_detected).sum(),
    })
}

fn analyze_trial(cfg: &ExperimentConfig, root: &Path, out: &Path, entry: &TrialEntry) -> Result<TrialAnalysis> {
    let dir = root.join(&entry.dir);
    let meta: TrialMeta = read_json(&dir.join("trial.json"))?;
    let force_path = dir.join("force.csv");
    let force = ForceTrace::read_csv(read(&force_path)?.as_slice()).map_err(|e| in_file(&force_path, e))?;
    let rms: RmsTable = read_json(&dir.join("emg_rms.json"))?;
    meta.periods.validate(meta.duration)?;
    let a = &cfg.analysis;
    let smoothed = smooth_force(&force.samples, force.sample_rate, a.smoothing_window, a.smoothing_step)?;
    let force_n = period_average(&smoothed, &meta.periods)?;
    let force_pct_mvc: Vec<f64> = force_n.iter().map(|f| 100.0 * f / meta.mvc_n).collect();
    let residual = residual_force(&smoothed, meta.periods.last(), meta.mvc_n)?;
    let rms_mv = rms.grid_segment_rms(&meta.periods)?;
    let nrms = normalized_rms(&rms_mv)?;

    let dest = out.join(&entry.dir);
    write(&dest.join("force_smoothed.csv"), &smoothed_csv(&smoothed, meta.mvc_n))?;
    let label = format!("subject {} {} {:.0}% MVC", meta.subject, meta.condition.as_str(), 100.0 * meta.level);
    for (name, window) in [("initial", meta.periods.0[0]), ("final", meta.periods.last())] {
        let map = rms.spatial_map(window)?;
        let (r, c) = map.interpolated_dims();
        write(&dest.join(format!("map_{name}.csv")), map.interpolated_csv().as_bytes())?;
        let title = format!("{label}: RMS {}-{} s", window.0, window.1);
        write(&dest.join(format!("map_{name}.svg")), svg::heat_map(&title, r, c, &map.interpolated, 2, "mV").as_bytes())?;
    }
    let removal = if entry.has("emg_contaminated.bin") { Some(removal_summary(cfg, &dir, meta.condition)?) } else { None };
    Ok(TrialAnalysis {
        subject: meta.subject,
        condition: meta.condition,
        level: meta.level,
        dir: entry.dir.clone(),
        mvc_n: meta.mvc_n,
        stim_amplitude_ma: meta.stim_amplitude_ma,
        vector_strength: meta.vector_strength,
        periods: meta.periods,
        initial_force_pct: force_pct_mvc[0],
        force_n,
        force_pct_mvc,
        residual_force_pct: residual,
        rms_mv,
        normalized_rms: nrms,
        removal,
    })
}

fn columnwise(rows: &[&Vec<f64>]) -> Result<Vec<MeanSe>> {
    let n = rows[0].len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(data("trials of one cell have different period counts"));
    }
    Ok((0..n).map(|i| MeanSe::of(&rows.iter().map(|r| r[i]).collect::<Vec<_>>())).collect())
}

fn optional(v: Vec<Option<f64>>) -> Option<MeanSe> {
    let v: Option<Vec<f64>> = v.into_iter().collect();
    v.filter(|v| !v.is_empty()).map(|v| MeanSe::of(&v))
}

fn summarize(levels: &[f64], conditions: &[Condition], trials: &[TrialAnalysis]) -> Result<Vec<CellSummary>> {
    let mut cells = Vec::new();
    for &level in levels {
        for &condition in conditions {
            let ts: Vec<&TrialAnalysis> = trials.iter().filter(|t| t.condition == condition && (t.level - level).abs() < 1e-9).collect();
            if ts.is_empty() {
                continue;
            }
            let col = |f: fn(&TrialAnalysis) -> f64| MeanSe::of(&ts.iter().map(|t| f(t)).collect::<Vec<_>>());
            cells.push(CellSummary {
                level,
                condition,
                initial_force_pct: col(|t| t.initial_force_pct),
                residual_force_pct: col(|t| t.residual_force_pct),
                final_normalized_rms: col(|t| t.final_normalized_rms()),
                stim_amplitude_ma: optional(ts.iter().map(|t| t.stim_amplitude_ma).collect()),
                vector_strength: optional(ts.iter().map(|t| t.vector_strength).collect()),
                force_pct_mvc: columnwise(&ts.iter().map(|t| &t.force_pct_mvc).collect::<Vec<_>>())?,
                normalized_rms: columnwise(&ts.iter().map(|t| &t.normalized_rms).collect::<Vec<_>>())?,
                removal_attenuation_db: optional(ts.iter().map(|t| t.removal.as_ref().and_then(|r| r.mean_attenuation_db)).collect()),
            });
        }
    }
    Ok(cells)
}

pub fn run(ctx: &Context, args: &Args) -> Result<()> {
    let manifest_path = args.manifest.clone().unwrap_or_else(|| ctx.out.join(MANIFEST_FILE));
    let root = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let manifest_bytes = read(&manifest_path)?;
    let manifest: RunManifest = serde_json::from_slice(&manifest_bytes).map_err(|e| data(format!("{}: {e}", manifest_path.display())))?;
    manifest.verify(&root)?;
    if manifest.trials.is_empty() {
        return Err(data("manifest lists no trials"));
    }
    let config_path = root.join(CONFIG_FILE);
    let text = std::fs::read_to_string(&config_path).map_err(|e| crate::error::io(&config_path, e))?;
    let cfg = ExperimentConfig::from_json(&text).map_err(|e| usage(format!("{}: {e}", config_path.display())))?;

    let out = root.join(ANALYSIS_DIR);
    let trials = parallel_map(ctx.jobs, manifest.trials.len(), |i| analyze_trial(&cfg, &root, &out, &manifest.trials[i]))?;
    let subjects: Vec<usize> = trials.iter().map(|t| t.subject).collect::<BTreeSet<_>>().into_iter().collect();
    let report = AnalysisReport {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        manifest_sha256: sha256_hex(&manifest_bytes),
        run_content_hash: manifest.content_hash.clone(),
        timestamps: Timestamps { created: timestamp()? },
        subjects,
        cells: summarize(&manifest.levels, &manifest.conditions, &trials)?,
        levels: manifest.levels.clone(),
        conditions: manifest.conditions.clone(),
        trials,
    };
    write(&out.join(REPORT_FILE), &json_bytes(&report))?;
    for c in &report.cells {
        println!(
            "{:>4.0}% MVC {:<3} residual {:6.2} %MVC  final nRMS {:.3}",
            100.0 * c.level,
            c.condition.as_str(),
            c.residual_force_pct.mean,
            c.final_normalized_rms.mean
        );
    }
    Ok(())
}
