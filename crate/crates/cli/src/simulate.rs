//! `fesim simulate`: runs the trial battery and writes the run directory.

use std::path::Path;
use std::time::Instant;

use fesim::config::{ExperimentConfig, LevelConfig};
use fesim::emg::EmgGridRecord;
use fesim::trial::{build_subject, contaminate_excerpt, run_trial, Condition, Subject, TrialRecord};

use crate::error::{usage, CliError, Result};
use crate::files::{json_bytes, parallel_map, sha256_hex, timestamp, write};
use crate::manifest::{trial_dir, ArtifactEvents, FileRef, RunManifest, Timestamps, TrialEntry, TrialMeta, CONFIG_FILE, MANIFEST_FILE};
use crate::Context;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Conditions to run (Vol, HF, LF), comma-separated.
    #[arg(long, value_delimiter = ',')]
    conditions: Vec<String>,
    /// Target levels as fractions of MVC, comma-separated; each must appear
    /// in the configuration.
    #[arg(long, value_delimiter = ',')]
    levels: Vec<f64>,
    /// Number of subjects, overriding the configuration.
    #[arg(long)]
    subjects: Option<usize>,
}

fn select_conditions(names: &[String]) -> Result<Vec<Condition>> {
    if names.is_empty() {
        return Ok(Condition::ALL.to_vec());
    }
    let picked: Vec<Condition> = names.iter().map(|n| Condition::parse(n.trim())).collect::<fesim::Result<_>>()?;
    Ok(Condition::ALL.into_iter().filter(|c| picked.contains(c)).collect())
}

fn select_levels(cfg: &ExperimentConfig, wanted: &[f64]) -> Result<Vec<LevelConfig>> {
    if wanted.is_empty() {
        return Ok(cfg.levels.clone());
    }
    for w in wanted {
        if !cfg.levels.iter().any(|l| (l.level - w).abs() < 1e-9) {
            let known: Vec<String> = cfg.levels.iter().map(|l| l.level.to_string()).collect();
            return Err(usage(format!("level {w} is not configured (configured: {})", known.join(", "))));
        }
    }
    Ok(cfg.levels.iter().filter(|l| wanted.iter().any(|w| (l.level - w).abs() < 1e-9)).cloned().collect())
}

struct Pending {
    files: Vec<FileRef>,
    dir: String,
    root: std::path::PathBuf,
}

impl Pending {
    fn put(&mut self, name: &str, bytes: Vec<u8>) -> Result<()> {
        write(&self.root.join(&self.dir).join(name), &bytes)?;
        self.files.push(FileRef::of(name, &bytes));
        Ok(())
    }

    fn put_emg(&mut self, name: &str, rec: &EmgGridRecord) -> Result<()> {
        let mut b = Vec::new();
        rec.write_binary(&mut b).expect("in-memory write");
        self.put(name, b)
    }
}

fn write_trial(root: &Path, cfg: &ExperimentConfig, level: &LevelConfig, rec: &TrialRecord) -> Result<TrialEntry> {
    let dir = trial_dir(rec.subject, rec.condition, rec.target_level);
    let mut p = Pending { files: Vec::new(), dir: dir.clone(), root: root.to_path_buf() };
    let meta = TrialMeta {
        subject: rec.subject,
        condition: rec.condition,
        level: rec.target_level,
        duration: rec.duration,
        periods: level.periods.clone(),
        seed: rec.seed,
        mvc_n: rec.mvc,
        initial_force: rec.initial_force,
        stim_amplitude_ma: rec.stim_amplitude,
        calibration: rec.calibration,
        vector_strength: rec.vector_strength,
        units: rec.spikes.trains.len(),
        active_units: rec.spikes.active_units(),
        total_spikes: rec.spikes.total_spikes(),
        force_sample_rate: rec.force.sample_rate,
        excerpt_start: rec.emg.excerpt_start,
    };
    p.put("trial.json", json_bytes(&meta))?;
    let mut b = Vec::new();
    rec.force.write_csv(&mut b).expect("in-memory write");
    p.put("force.csv", b)?;
    let mut b = Vec::new();
    rec.spikes.write_csv(&mut b).expect("in-memory write");
    p.put("spikes.csv", b)?;
    p.put("emg_rms.json", serde_json::to_vec(&rec.emg.rms).expect("table serializes"))?;
    p.put_emg("emg_excerpt.bin", &rec.emg.excerpt)?;
    p.put_emg("emg_rest.bin", &rec.emg.rest)?;
    if let Some(amp) = rec.stim_amplitude {
        let params = cfg.stim_params(rec.condition == Condition::Hf).with_amplitude(amp);
        p.put("stim.json", json_bytes(&params.sidecar(cfg.protocols.stim_sample_rate)))?;
    }
    if let Some((dirty, truth)) = contaminate_excerpt(cfg, rec)? {
        p.put_emg("emg_contaminated.bin", &dirty)?;
        p.put_emg("emg_artifact.bin", &EmgGridRecord { channels: truth.artifact, ..dirty.clone() })?;
        let events = ArtifactEvents { protocol: rec.condition.as_str().into(), event_times: truth.event_times };
        p.put("artifact_events.json", json_bytes(&events))?;
    }
    Ok(TrialEntry { subject: rec.subject, condition: rec.condition, level: rec.target_level, dir, files: p.files })
}

pub fn run(ctx: &Context, args: &Args) -> Result<()> {
    let mut cfg = ctx.config.clone();
    if let Some(n) = args.subjects {
        if n == 0 {
            return Err(usage("--subjects must be at least 1"));
        }
        cfg.subjects = n;
    }
    let conditions = select_conditions(&args.conditions)?;
    cfg.levels = select_levels(&cfg, &args.levels)?;
    cfg.validate()?;

    let started = Instant::now();
    let subjects: Vec<Subject> = parallel_map(ctx.jobs, cfg.subjects, |i| build_subject(&cfg, i).map_err(CliError::from))?;
    let mut tasks = Vec::new();
    for s in 0..cfg.subjects {
        for (l, _) in cfg.levels.iter().enumerate() {
            for &c in &conditions {
                tasks.push((s, l, c));
            }
        }
    }
    let root = ctx.out.as_path();
    let entries = parallel_map(ctx.jobs, tasks.len(), |i| {
        let (s, l, c) = tasks[i];
        let level = &cfg.levels[l];
        let t = Instant::now();
        let rec = run_trial(&cfg, &subjects[s], c, level)?;
        let entry = write_trial(root, &cfg, level, &rec)?;
        eprintln!("{} done in {:.1} s", entry.dir, t.elapsed().as_secs_f64());
        Ok(entry)
    })?;

    let config_bytes = {
        let mut b = cfg.to_json().into_bytes();
        b.push(b'\n');
        b
    };
    write(&root.join(CONFIG_FILE), &config_bytes)?;
    let manifest = RunManifest {
        tool: "fesim".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config_file: CONFIG_FILE.into(),
        config_hash: sha256_hex(&config_bytes),
        seed: cfg.seed,
        subjects: cfg.subjects,
        conditions,
        levels: cfg.levels.iter().map(|l| l.level).collect(),
        timestamps: Timestamps { created: timestamp()? },
        content_hash: RunManifest::content_hash(&entries),
        trials: entries,
    };
    write(&root.join(MANIFEST_FILE), &json_bytes(&manifest))?;
    println!(
        "simulated {} trials for {} subject(s) into {} in {:.1} s",
        manifest.trials.len(),
        cfg.subjects,
        root.display(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}
