//! Trial orchestration: subjects, calibrated stimulation trials, voluntary
//! trials and the condition x level battery.

use serde::{Deserialize, Serialize};

use crate::analysis::RmsTable;
use crate::axon::{build_pool, simulate_schedule, vector_strength, AxonPool, SpikeTrainSet};
use crate::config::{ExperimentConfig, LevelConfig};
use crate::emg::{self, ArtifactGroundTruth, EmgGridRecord, EmgLabel, EmgSynth, MuapTemplate};
use crate::error::{invalid, Result};
use crate::muscle::{self, build_units, calibrate_amplitude, force_from_spikes, voluntary_trial, Calibration, ForceOutput, ForceTrace, MotorUnit};
use crate::rng::derive_seed;
use crate::stim::{PulseSchedule, StimParams};

/// Activation strategy of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    Vol,
    #[serde(rename = "HF")]
    Hf,
    #[serde(rename = "LF")]
    Lf,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Vol, Condition::Hf, Condition::Lf];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Vol => "Vol",
            Condition::Hf => "HF",
            Condition::Lf => "LF",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "VOL" => Ok(Condition::Vol),
            "HF" => Ok(Condition::Hf),
            "LF" => Ok(Condition::Lf),
            _ => Err(invalid(format!("unknown condition '{s}' (expected Vol, HF or LF)"))),
        }
    }

    pub fn is_stimulated(self) -> bool {
        self != Condition::Vol
    }
}

/// One simulated participant: a motor pool, its units and MUAP templates.
#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub index: usize,
    pub seed: u64,
    pub pool: AxonPool,
    pub units: Vec<MotorUnit>,
    /// Newtons.
    pub mvc: f64,
    pub templates: Vec<MuapTemplate>,
}

pub fn build_subject(cfg: &ExperimentConfig, index: usize) -> Result<Subject> {
    let seed = derive_seed(cfg.seed, "subject", index as u64);
    let p = &cfg.pool;
    let pool = build_pool(p.units, &p.diameter, derive_seed(seed, "pool", 0), &p.axon)?;
    let units = build_units(&pool, &p.motor_units)?;
    let mvc = muscle::mvc(&units, &p.fatigue);
    let templates = emg::make_templates(&units, &cfg.emg.layout, &cfg.emg.templates, cfg.emg.sample_rate, derive_seed(seed, "templates", 0))?;
    Ok(Subject { index, seed, pool, units, mvc, templates })
}

/// Trial EMG in compact form.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialEmg {
    /// Per-second mean squares over the whole trial.
    pub rms: RmsTable,
    /// Full-resolution clean excerpt.
    pub excerpt: EmgGridRecord,
    /// Seconds from trial start at which the excerpt begins.
    pub excerpt_start: f64,
    /// Rest-state recording (noise only) for replacement-based cleaning.
    pub rest: EmgGridRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub subject: usize,
    pub condition: Condition,
    pub target_level: f64,
    pub duration: f64,
    pub stim_amplitude: Option<f64>,
    pub calibration: Option<Calibration>,
    pub seed: u64,
    pub mvc: f64,
    /// Mean force over 5-15 s as a fraction of MVC.
    pub initial_force: f64,
    pub vector_strength: Option<f64>,
    pub spikes: SpikeTrainSet,
    pub force: ForceTrace,
    pub emg: TrialEmg,
}

fn trial_seed(subject: &Subject, condition: Condition, level: f64) -> u64 {
    let key = (level * 1e6).round() as u64;
    derive_seed(subject.seed, &format!("trial/{}", condition.as_str()), key)
}

/// Stimulated trial dynamics at a fixed amplitude.
fn stimulate(cfg: &ExperimentConfig, subject: &Subject, params: &StimParams, duration: f64, seed: u64) -> Result<(SpikeTrainSet, ForceOutput)> {
    let schedule = PulseSchedule::new(params, duration, cfg.protocols.stim_sample_rate)?;
    let spikes = simulate_schedule(&subject.pool, &schedule, derive_seed(seed, "axon-noise", 0));
    let force = force_from_spikes(&spikes, &subject.units, duration, 1.0 / cfg.analysis.force_sample_rate, &cfg.pool.fatigue, true)?;
    Ok((spikes, force))
}

/// Amplitude reaching `level` over the calibration window, found on fresh
/// runs that share the trial's noise so the trial reproduces the result.
pub fn calibrate(cfg: &ExperimentConfig, subject: &Subject, condition: Condition, level: f64) -> Result<Calibration> {
    let base = cfg.stim_params(condition == Condition::Hf);
    let seed = trial_seed(subject, condition, level);
    let cal = &cfg.protocols.calibration;
    calibrate_amplitude(level, cal, |a| {
        let (_, f) = stimulate(cfg, subject, &base.with_amplitude(a), cal.window.1, seed)?;
        Ok(f.trace.mean_between(cal.window.0, cal.window.1) / subject.mvc)
    })
}

/// Simulates one trial of the battery.
pub fn run_trial(cfg: &ExperimentConfig, subject: &Subject, condition: Condition, level: &LevelConfig) -> Result<TrialRecord> {
    let seed = trial_seed(subject, condition, level.level);
    let duration = level.duration;
    let (spikes, force, calibration) = match condition {
        Condition::Vol => {
            let out = voluntary_trial(
                &subject.units,
                level.level,
                duration,
                1.0 / cfg.analysis.force_sample_rate,
                &cfg.protocols.voluntary,
                &cfg.pool.fatigue,
                derive_seed(seed, "voluntary", 0),
            )?;
            (out.spikes, out.force, None)
        }
        _ => {
            let cal = calibrate(cfg, subject, condition, level.level)?;
            let params = cfg.stim_params(condition == Condition::Hf).with_amplitude(cal.amplitude);
            let (s, f) = stimulate(cfg, subject, &params, duration, seed)?;
            (s, f, Some(cal))
        }
    };
    let (w0, w1) = cfg.protocols.calibration.window;
    let initial_force = force.trace.mean_between(w0, w1) / subject.mvc;
    let vs = if spikes.total_spikes() > 0 {
        let f = cfg.stim_params(false).repetition_frequency();
        Some(vector_strength(&spikes, f)?)
    } else {
        None
    };
    let label = if condition == Condition::Vol { EmgLabel::Vol } else { EmgLabel::Clean };
    let emg = synthesize_trial_emg(cfg, subject, &spikes, &force.excitability_at_spike, duration, derive_seed(seed, "emg", 0), label)?;
    Ok(TrialRecord {
        subject: subject.index,
        condition,
        target_level: level.level,
        duration,
        stim_amplitude: calibration.map(|c| c.amplitude),
        calibration,
        seed,
        mvc: subject.mvc,
        initial_force,
        vector_strength: vs,
        spikes,
        force: force.trace,
        emg,
    })
}

/// Streams the trial EMG channel by channel, keeping the per-second table,
/// an excerpt and a rest recording.
fn synthesize_trial_emg(
    cfg: &ExperimentConfig,
    subject: &Subject,
    spikes: &SpikeTrainSet,
    amplitude: &[Vec<f64>],
    duration: f64,
    seed: u64,
    label: EmgLabel,
) -> Result<TrialEmg> {
    let e = &cfg.emg;
    let synth = EmgSynth::new(spikes, Some(amplitude), &subject.templates, e.layout, e.sample_rate, duration, e.noise, seed)?;
    let lo = (e.excerpt_start * e.sample_rate).round() as usize;
    let hi = lo + (e.excerpt_length * e.sample_rate).round() as usize;
    let mut mean_square = Vec::with_capacity(e.layout.channels());
    let mut excerpt = Vec::with_capacity(e.layout.channels());
    for c in 0..e.layout.channels() {
        let x = synth.channel(c);
        let t = RmsTable::from_channels(1, 1, [x.as_slice()], e.sample_rate);
        mean_square.extend(t.mean_square);
        excerpt.push(x[lo..hi.min(x.len())].to_vec());
    }
    let rest_synth = EmgSynth::new(
        &SpikeTrainSet::empty(subject.units.len()),
        None,
        &subject.templates,
        e.layout,
        e.sample_rate,
        e.rest_length,
        e.noise,
        derive_seed(seed, "rest", 0),
    )?;
    Ok(TrialEmg {
        rms: RmsTable { rows: e.layout.rows, cols: e.layout.cols, mean_square },
        excerpt: EmgGridRecord { sample_rate: e.sample_rate, layout: e.layout, label, channels: excerpt },
        excerpt_start: e.excerpt_start,
        rest: rest_synth.record(EmgLabel::Clean),
    })
}

/// The trial's excerpt contaminated with its own stimulation artifact.
/// Voluntary trials have none.
pub fn contaminate_excerpt(cfg: &ExperimentConfig, record: &TrialRecord) -> Result<Option<(EmgGridRecord, ArtifactGroundTruth)>> {
    let seed = derive_seed(record.seed, "artifact", 0);
    let ex = &record.emg.excerpt;
    match record.condition {
        Condition::Vol => Ok(None),
        Condition::Hf => emg::inject_hf_artifact(ex, &cfg.artifacts.hf, seed).map(Some),
        Condition::Lf => {
            let f = cfg.protocols.lf.base_frequency;
            let fs = cfg.protocols.stim_sample_rate;
            let start = record.emg.excerpt_start;
            let end = start + ex.duration();
            let first = (start * f).ceil() as usize;
            let times: Vec<f64> = (first..)
                .map(|p| (p as f64 * fs / f + 1e-9).floor() / fs)
                .take_while(|&t| t < end)
                .map(|t| t - start)
                .filter(|&t| t >= 0.0 && t < ex.duration())
                .collect();
            emg::inject_lf_artifact(ex, &times, &cfg.artifacts.lf, seed).map(Some)
        }
    }
}

/// Clean EMG of a short voluntary contraction at `level`, for exercising
/// artifact injection and removal without running a full trial.
pub fn voluntary_recording(cfg: &ExperimentConfig, subject: &Subject, level: f64, duration: f64, seed: u64) -> Result<EmgGridRecord> {
    let out = voluntary_trial(
        &subject.units,
        level,
        duration,
        1.0 / cfg.analysis.force_sample_rate,
        &cfg.protocols.voluntary,
        &cfg.pool.fatigue,
        derive_seed(seed, "voluntary", 0),
    )?;
    let e = &cfg.emg;
    emg::synthesize_emg(&out.spikes, None, &subject.templates, e.layout, e.sample_rate, duration, e.noise, derive_seed(seed, "emg", 0))
}

/// Runs the selected conditions and levels for one subject, level-major in
/// configuration order.
pub fn run_battery(cfg: &ExperimentConfig, subject: &Subject, conditions: &[Condition], levels: &[LevelConfig]) -> Result<Vec<TrialRecord>> {
    let mut out = Vec::with_capacity(conditions.len() * levels.len());
    for level in levels {
        for &c in conditions {
            out.push(run_trial(cfg, subject, c, level)?);
        }
    }
    Ok(out)
}
