//! Surface EMG on an electrode grid: MUAP templates, superposition,
//! acquisition noise and stimulation artifacts with known ground truth.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::axon::SpikeTrainSet;
use crate::dsp;
use crate::error::{bad_data, invalid, Result};
use crate::muscle::MotorUnit;
use crate::rng;

/// Electrode grid geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridLayout {
    pub rows: usize,
    pub cols: usize,
    /// Inter-electrode distance in millimeters.
    pub pitch_mm: u32,
}

impl Default for GridLayout {
    fn default() -> Self {
        Self { rows: 8, cols: 16, pitch_mm: 10 }
    }
}

impl GridLayout {
    pub fn channels(&self) -> usize {
        self.rows * self.cols
    }

    /// Row-major channel index.
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }
}

/// Where MUAP centers are placed on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialPolicy {
    /// Larger units sit closer to the grid center.
    CenterWeighted,
    /// Centers uniform over the grid area.
    Uniform,
}

/// MUAP generation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemplateConfig {
    /// Peak amplitude (mV) of the smallest unit.
    pub amplitude_min_mv: f64,
    /// Amplitude scales as `(P / P_min)^amplitude_exponent`.
    pub amplitude_exponent: f64,
    pub decay_min_mm: f64,
    pub decay_max_mm: f64,
    pub duration_min: f64,
    pub duration_max: f64,
    pub policy: SpatialPolicy,
}

impl Default for TemplateConfig {
    fn default() -> Self {
        Self {
            amplitude_min_mv: 0.02,
            amplitude_exponent: 0.5,
            decay_min_mm: 10.0,
            decay_max_mm: 20.0,
            duration_min: 10e-3,
            duration_max: 15e-3,
            policy: SpatialPolicy::CenterWeighted,
        }
    }
}

/// One unit's action potential as seen by the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuapTemplate {
    pub unit_id: usize,
    /// Fractional (row, col) position on the grid.
    pub center: (f64, f64),
    /// Gaussian spatial decay length in millimeters.
    pub spatial_decay: f64,
    /// Zero-mean kernel with unit peak magnitude, at the EMG sample rate.
    pub waveform: Vec<f64>,
    /// Peak amplitude in mV.
    pub amplitude: f64,
}

impl MuapTemplate {
    /// Peak amplitude at electrode `(row, col)`.
    pub fn channel_gain(&self, grid: &GridLayout, row: usize, col: usize) -> f64 {
        let p = grid.pitch_mm as f64;
        let dr = (row as f64 - self.center.0) * p;
        let dc = (col as f64 - self.center.1) * p;
        self.amplitude * (-(dr * dr + dc * dc) / (2.0 * self.spatial_decay * self.spatial_decay)).exp()
    }
}

/// Triphasic kernel: a Mexican-hat core plus a biphasic asymmetry term,
/// made exactly zero-mean and scaled to unit peak.
fn triphasic_kernel(n: usize, asymmetry: f64) -> Vec<f64> {
    let mid = (n as f64 - 1.0) / 2.0;
    let s = n as f64 / 8.0;
    let mut w: Vec<f64> = (0..n)
        .map(|i| {
            let x = (i as f64 - mid) / s;
            let g = (-0.5 * x * x).exp();
            (1.0 - x * x) * g + asymmetry * x * g
        })
        .collect();
    let m = dsp::mean(&w);
    w.iter_mut().for_each(|v| *v -= m);
    let peak = w.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    w.iter_mut().for_each(|v| *v /= peak);
    let m = dsp::mean(&w);
    w.iter_mut().for_each(|v| *v -= m);
    w
}

/// Draws one template per unit.
pub fn make_templates(
    units: &[MotorUnit],
    grid: &GridLayout,
    cfg: &TemplateConfig,
    sample_rate: f64,
    seed: u64,
) -> Result<Vec<MuapTemplate>> {
    if units.is_empty() {
        return Err(invalid("templates need at least one unit"));
    }
    if !(cfg.duration_min > 0.0 && cfg.duration_min <= cfg.duration_max) || !(cfg.decay_min_mm > 0.0 && cfg.decay_min_mm <= cfg.decay_max_mm) {
        return Err(invalid("template duration/decay ranges invalid"));
    }
    let pmin = units.iter().map(|u| u.twitch_peak).fold(f64::INFINITY, f64::min);
    let pmax = units.iter().map(|u| u.twitch_peak).fold(0.0, f64::max);
    let half = ((grid.rows as f64 - 1.0) / 2.0, (grid.cols as f64 - 1.0) / 2.0);
    let mut r = rng::stream(seed, "muap-templates", 0);
    Ok(units
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let size = if pmax > pmin { (u.twitch_peak / pmin).ln() / (pmax / pmin).ln() } else { 0.5 };
            let center = match cfg.policy {
                SpatialPolicy::Uniform => (r.random::<f64>() * (grid.rows - 1) as f64, r.random::<f64>() * (grid.cols - 1) as f64),
                SpatialPolicy::CenterWeighted => {
                    let radius = (1.0 - 0.75 * size) * r.random::<f64>().sqrt();
                    let angle = 2.0 * std::f64::consts::PI * r.random::<f64>();
                    (half.0 + radius * half.0 * angle.sin(), half.1 + radius * half.1 * angle.cos())
                }
            };
            let duration = cfg.duration_min + (cfg.duration_max - cfg.duration_min) * r.random::<f64>();
            let n = ((duration * sample_rate).round() as usize).max(5);
            let asymmetry = 0.6 * (r.random::<f64>() - 0.5);
            MuapTemplate {
                unit_id: i,
                center,
                spatial_decay: cfg.decay_min_mm + (cfg.decay_max_mm - cfg.decay_min_mm) * size,
                waveform: triphasic_kernel(n, asymmetry),
                amplitude: cfg.amplitude_min_mv * (u.twitch_peak / pmin).powf(cfg.amplitude_exponent),
            }
        })
        .collect())
}

/// Content tag of a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmgLabel {
    Clean,
    LfContaminated,
    HfContaminated,
    Vol,
}

/// Monopolar grid recording, one series per channel in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmgGridRecord {
    pub sample_rate: f64,
    pub layout: GridLayout,
    pub label: EmgLabel,
    /// Millivolts.
    pub channels: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EmgHeader {
    rate: f64,
    rows: usize,
    cols: usize,
    label: EmgLabel,
    length: usize,
}

/// Leading bytes of the binary record format.
pub const EMG_MAGIC: &[u8; 8] = b"FESEMG01";

impl EmgGridRecord {
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.sample_rate
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.len() != self.layout.channels() {
            return Err(bad_data(format!("{} channels for a {}x{} grid", self.channels.len(), self.layout.rows, self.layout.cols)));
        }
        let n = self.len();
        if self.channels.iter().any(|c| c.len() != n) {
            return Err(bad_data("channels differ in length"));
        }
        Ok(())
    }

    /// Samples `[start, end)` seconds of every channel.
    pub fn slice(&self, start: f64, end: f64) -> Self {
        let lo = ((start * self.sample_rate).round() as usize).min(self.len());
        let hi = ((end * self.sample_rate).round() as usize).clamp(lo, self.len());
        Self { channels: self.channels.iter().map(|c| c[lo..hi].to_vec()).collect(), ..self.clone() }
    }

    /// Binary form: magic, u32 header length, JSON header, then
    /// little-endian f32 samples channel by channel.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header = EmgHeader {
            rate: self.sample_rate,
            rows: self.layout.rows,
            cols: self.layout.cols,
            label: self.label,
            length: self.len(),
        };
        let h = serde_json::to_vec(&header).map_err(std::io::Error::other)?;
        w.write_all(EMG_MAGIC)?;
        w.write_all(&(h.len() as u32).to_le_bytes())?;
        w.write_all(&h)?;
        let mut buf = Vec::with_capacity(self.len() * 4);
        for c in &self.channels {
            buf.clear();
            for &v in c {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| bad_data("EMG file too short"))?;
        if &magic != EMG_MAGIC {
            return Err(bad_data("EMG file has wrong header magic"));
        }
        let mut len = [0u8; 4];
        r.read_exact(&mut len).map_err(|_| bad_data("EMG header truncated"))?;
        let mut h = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut h).map_err(|_| bad_data("EMG header truncated"))?;
        let header: EmgHeader = serde_json::from_slice(&h).map_err(|e| bad_data(format!("EMG header: {e}")))?;
        if header.rows == 0 || header.cols == 0 || !(header.rate > 0.0) {
            return Err(bad_data("EMG header has empty grid or bad rate"));
        }
        let layout = GridLayout { rows: header.rows, cols: header.cols, pitch_mm: 10 };
        let mut bytes = vec![0u8; header.length * 4];
        let mut channels = Vec::with_capacity(layout.channels());
        for _ in 0..layout.channels() {
            r.read_exact(&mut bytes).map_err(|_| bad_data("EMG samples truncated"))?;
            channels.push(bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64).collect());
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest).map_err(|e| bad_data(e.to_string()))? != 0 {
            return Err(bad_data("EMG file has trailing bytes"));
        }
        Ok(Self { sample_rate: header.rate, layout, label: header.label, channels })
    }

    /// CSV excerpt: one column per channel.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let names: Vec<String> = (0..self.layout.rows)
            .flat_map(|r| (0..self.layout.cols).map(move |c| format!("r{r}c{c}")))
            .collect();
        writeln!(w, "time_s,{}", names.join(","))?;
        for i in 0..self.len() {
            write!(w, "{}", i as f64 / self.sample_rate)?;
            for c in &self.channels {
                write!(w, ",{}", c[i])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Acquisition noise settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub rms_mv: f64,
    pub band_low: f64,
    pub band_high: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { rms_mv: 0.003, band_low: 10.0, band_high: 900.0 }
    }
}

/// Channel-by-channel EMG synthesis from spike trains.
///
/// Each channel is the sum over spikes of the unit's kernel times its
/// channel gain (and an optional per-spike amplitude factor), plus
/// band-limited Gaussian noise scaled to exactly the requested RMS.
pub struct EmgSynth<'a> {
    templates: &'a [MuapTemplate],
    layout: GridLayout,
    sample_rate: f64,
    length: usize,
    /// (onset sample, unit, amplitude factor), sorted by onset.
    events: Vec<(usize, usize, f64)>,
    noise: NoiseConfig,
    seed: u64,
}

impl<'a> EmgSynth<'a> {
    pub fn new(
        spikes: &SpikeTrainSet,
        amplitude_factors: Option<&[Vec<f64>]>,
        templates: &'a [MuapTemplate],
        layout: GridLayout,
        sample_rate: f64,
        duration: f64,
        noise: NoiseConfig,
        seed: u64,
    ) -> Result<Self> {
        if spikes.trains.len() != templates.len() {
            return Err(bad_data(format!("{} spike trains for {} templates", spikes.trains.len(), templates.len())));
        }
        if let Some(f) = amplitude_factors {
            if f.len() != spikes.trains.len() || f.iter().zip(&spikes.trains).any(|(a, t)| a.len() != t.len()) {
                return Err(bad_data("amplitude factors not aligned with spikes"));
            }
        }
        if !(noise.rms_mv >= 0.0) || !(0.0 < noise.band_low && noise.band_low < noise.band_high && noise.band_high < sample_rate / 2.0) {
            return Err(invalid("noise band must satisfy 0 < low < high < Nyquist"));
        }
        let length = (duration * sample_rate).round() as usize;
        let mut events = Vec::with_capacity(spikes.total_spikes());
        for (u, train) in spikes.trains.iter().enumerate() {
            for (j, &t) in train.iter().enumerate() {
                let onset = (t * sample_rate).round();
                if onset >= 0.0 && (onset as usize) < length {
                    let a = amplitude_factors.map_or(1.0, |f| f[u][j]);
                    events.push((onset as usize, u, a));
                }
            }
        }
        events.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(Self { templates, layout, sample_rate, length, events, noise, seed })
    }

    pub fn len(&self) -> usize {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        self.length == 0
    }

    /// Noise-free MUAP superposition for one channel.
    pub fn muap_channel(&self, c: usize) -> Vec<f64> {
        let (row, col) = (c / self.layout.cols, c % self.layout.cols);
        let gains: Vec<f64> = self.templates.iter().map(|t| t.channel_gain(&self.layout, row, col)).collect();
        let mut x = vec![0.0; self.length];
        for &(onset, u, a) in &self.events {
            let g = gains[u] * a;
            if g == 0.0 {
                continue;
            }
            let w = &self.templates[u].waveform;
            let end = (onset + w.len()).min(self.length);
            for (xi, wi) in x[onset..end].iter_mut().zip(w) {
                *xi += g * wi;
            }
        }
        x
    }

    /// Band-limited noise for one channel.
    pub fn noise_channel(&self, c: usize) -> Vec<f64> {
        if self.noise.rms_mv == 0.0 || self.length == 0 {
            return vec![0.0; self.length];
        }
        let pad = self.sample_rate.round() as usize;
        let mut r = rng::stream(self.seed, "emg-noise", c as u64);
        let mut x: Vec<f64> = (0..self.length + 2 * pad).map(|_| r.sample(StandardNormal)).collect();
        dsp::filtfilt(&dsp::bandpass(self.noise.band_low, self.noise.band_high, self.sample_rate), &mut x);
        let mut x = x[pad..pad + self.length].to_vec();
        let s = self.noise.rms_mv / dsp::rms(&x);
        x.iter_mut().for_each(|v| *v *= s);
        x
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        let mut x = self.muap_channel(c);
        for (a, b) in x.iter_mut().zip(self.noise_channel(c)) {
            *a += b;
        }
        x
    }

    pub fn record(&self, label: EmgLabel) -> EmgGridRecord {
        EmgGridRecord {
            sample_rate: self.sample_rate,
            layout: self.layout,
            label,
            channels: (0..self.layout.channels()).map(|c| self.channel(c)).collect(),
        }
    }
}

/// Full clean record for short simulations.
pub fn synthesize_emg(
    spikes: &SpikeTrainSet,
    amplitude_factors: Option<&[Vec<f64>]>,
    templates: &[MuapTemplate],
    layout: GridLayout,
    sample_rate: f64,
    duration: f64,
    noise: NoiseConfig,
    seed: u64,
) -> Result<EmgGridRecord> {
    Ok(EmgSynth::new(spikes, amplitude_factors, templates, layout, sample_rate, duration, noise, seed)?.record(EmgLabel::Clean))
}

/// Injected artifact and its event times.
#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactGroundTruth {
    pub artifact: Vec<Vec<f64>>,
    /// Seconds; for LF the jittered peak samples, for HF the burst onsets.
    pub event_times: Vec<f64>,
}

/// Per-event shape of the LF artifact, relative to its peak sample.
pub const LF_ARTIFACT_SHAPE: [(isize, f64); 5] = [(-1, 0.3), (0, 1.0), (1, -0.6), (2, -0.45), (3, -0.25)];

/// LF artifact injection settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LfArtifactConfig {
    /// Peak artifact over clean-channel RMS.
    pub magnitude_ratio: f64,
    /// Uniform timing jitter bound in seconds.
    pub timing_jitter: f64,
    /// Relative uniform amplitude jitter bound.
    pub amplitude_jitter: f64,
}

impl Default for LfArtifactConfig {
    fn default() -> Self {
        Self { magnitude_ratio: 100.0, timing_jitter: 2e-3, amplitude_jitter: 0.1 }
    }
}

/// Adds a sharp biphasic transient at each (jittered) stimulus time.
pub fn inject_lf_artifact(
    emg: &EmgGridRecord,
    stim_times: &[f64],
    cfg: &LfArtifactConfig,
    seed: u64,
) -> Result<(EmgGridRecord, ArtifactGroundTruth)> {
    emg.validate()?;
    if !(cfg.magnitude_ratio >= 10.0) {
        return Err(invalid("artifact magnitude ratio must be at least 10"));
    }
    if stim_times.iter().any(|&t| !(t >= 0.0 && t < emg.duration())) {
        return Err(invalid("stimulus times must lie inside the record"));
    }
    let n = emg.len();
    let scale: Vec<f64> = emg.channels.iter().map(|c| cfg.magnitude_ratio * dsp::rms(c)).collect();
    let mut r = rng::stream(seed, "lf-artifact", 0);
    let mut artifact = vec![vec![0.0; n]; emg.channels.len()];
    let mut events = Vec::with_capacity(stim_times.len());
    for &t in stim_times {
        let jitter = cfg.timing_jitter * (2.0 * r.random::<f64>() - 1.0);
        let amp = 1.0 + cfg.amplitude_jitter * (2.0 * r.random::<f64>() - 1.0);
        let peak = ((t + jitter) * emg.sample_rate).round().clamp(0.0, (n - 1) as f64) as isize;
        events.push(peak as f64 / emg.sample_rate);
        for (ch, s) in artifact.iter_mut().zip(&scale) {
            for &(off, v) in &LF_ARTIFACT_SHAPE {
                let i = peak + off;
                if i >= 0 && (i as usize) < n {
                    ch[i as usize] += s * amp * v;
                }
            }
        }
    }
    let channels = emg.channels.iter().zip(&artifact).map(|(c, a)| c.iter().zip(a).map(|(x, y)| x + y).collect()).collect();
    Ok((
        EmgGridRecord { label: EmgLabel::LfContaminated, channels, ..emg.clone() },
        ArtifactGroundTruth { artifact, event_times: events },
    ))
}

/// Burst timing of the kilohertz stimulus as it appears in the recording.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurstSchedule {
    pub burst_frequency: f64,
    pub carrier_frequency: f64,
    /// Duration of each polarity block in seconds.
    pub half_burst: f64,
}

impl Default for BurstSchedule {
    fn default() -> Self {
        let hf = crate::stim::HfParams::default();
        Self {
            burst_frequency: hf.burst_frequency,
            carrier_frequency: hf.carrier_frequency(),
            half_burst: hf.pulses_per_half_burst() as f64 * hf.carrier_period(),
        }
    }
}

/// Slow modulation of the HF artifact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftConfig {
    /// Peak relative amplitude excursion.
    pub amplitude: f64,
    /// Peak timing excursion in seconds.
    pub time: f64,
    /// Period of the amplitude modulation in seconds.
    pub amplitude_period: f64,
    /// Period of the timing modulation in seconds.
    pub time_period: f64,
}

impl Default for DriftConfig {
    fn default() -> Self {
        Self { amplitude: 0.2, time: 50e-6, amplitude_period: 300.0, time_period: 260.0 }
    }
}

impl DriftConfig {
    pub fn none() -> Self {
        Self { amplitude: 0.0, time: 0.0, ..Default::default() }
    }
}

/// HF artifact injection settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HfArtifactConfig {
    pub magnitude_ratio: f64,
    pub schedule: BurstSchedule,
    pub drift: DriftConfig,
}

impl Default for HfArtifactConfig {
    fn default() -> Self {
        Self { magnitude_ratio: 100.0, schedule: BurstSchedule::default(), drift: DriftConfig::default() }
    }
}

/// Shape of the recorded HF artifact `s` seconds into a burst: the alias of
/// the carrier at the recording rate, with polarity following the burst
/// halves and a decaying transient at each polarity switch.
pub fn hf_artifact_shape(s: f64, schedule: &BurstSchedule, sample_rate: f64) -> f64 {
    let fc = schedule.carrier_frequency;
    let alias = (fc - (fc / sample_rate).round() * sample_rate).abs();
    let h = schedule.half_burst;
    let (sign, local) = if s < h {
        (1.0, s)
    } else if s < 2.0 * h {
        (-1.0, s - h)
    } else {
        return 0.0;
    };
    let osc = (2.0 * std::f64::consts::PI * alias * local).sin();
    let edge = (-local / 0.6e-3).exp();
    sign * (0.6 * osc + 0.4 * edge)
}

/// Time of sample `n` within its burst, exact for integer rates.
fn burst_phase(n: usize, sample_rate: f64, burst_frequency: f64) -> f64 {
    let (fs, fb) = (sample_rate, burst_frequency);
    if fs.fract() == 0.0 && fb.fract() == 0.0 && fs < 1e9 && fb < 1e9 {
        let (fs_i, fb_i) = (fs as u128, fb as u128);
        // t = n / fs; phase = (n * fb mod fs) / (fs * fb)
        let num = (n as u128 * fb_i) % fs_i;
        num as f64 / (fs * fb)
    } else {
        (n as f64 / fs).rem_euclid(1.0 / fb)
    }
}

/// Adds the burst-periodic HF artifact with slow amplitude and timing drift.
pub fn inject_hf_artifact(emg: &EmgGridRecord, cfg: &HfArtifactConfig, seed: u64) -> Result<(EmgGridRecord, ArtifactGroundTruth)> {
    emg.validate()?;
    if !(cfg.magnitude_ratio >= 10.0) {
        return Err(invalid("artifact magnitude ratio must be at least 10"));
    }
    let sch = cfg.schedule;
    if !(sch.burst_frequency > 0.0) || !(sch.carrier_frequency > 0.0) || !(sch.half_burst > 0.0) || 2.0 * sch.half_burst > 1.0 / sch.burst_frequency + 1e-12 {
        return Err(invalid("HF burst schedule inconsistent"));
    }
    let d = cfg.drift;
    if !(d.amplitude >= 0.0 && d.amplitude < 1.0) || !(d.time >= 0.0) || !(d.amplitude_period > 0.0) || !(d.time_period > 0.0) {
        return Err(invalid("drift parameters out of range"));
    }
    let n = emg.len();
    let fs = emg.sample_rate;
    let mut r = rng::stream(seed, "hf-artifact", 0);
    let (pa, pt) = (2.0 * std::f64::consts::PI * r.random::<f64>(), 2.0 * std::f64::consts::PI * r.random::<f64>());
    let period = 1.0 / sch.burst_frequency;
    let base: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            let mut s = burst_phase(i, fs, sch.burst_frequency);
            let mut gain = 1.0;
            if d.time > 0.0 {
                s = (s - d.time * (2.0 * std::f64::consts::PI * t / d.time_period + pt).sin()).rem_euclid(period);
            }
            if d.amplitude > 0.0 {
                gain += d.amplitude * (2.0 * std::f64::consts::PI * t / d.amplitude_period + pa).sin();
            }
            gain * hf_artifact_shape(s, &sch, fs)
        })
        .collect();
    let artifact: Vec<Vec<f64>> = emg
        .channels
        .iter()
        .map(|c| {
            let s = cfg.magnitude_ratio * dsp::rms(c);
            base.iter().map(|v| s * v).collect()
        })
        .collect();
    let bursts = (emg.duration() * sch.burst_frequency).ceil() as usize;
    let event_times = (0..bursts).map(|k| k as f64 / sch.burst_frequency).filter(|&t| t < emg.duration()).collect();
    let channels = emg.channels.iter().zip(&artifact).map(|(c, a)| c.iter().zip(a).map(|(x, y)| x + y).collect()).collect();
    Ok((
        EmgGridRecord { label: EmgLabel::HfContaminated, channels, ..emg.clone() },
        ArtifactGroundTruth { artifact, event_times },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn units(n: usize) -> Vec<MotorUnit> {
        (0..n)
            .map(|i| MotorUnit {
                axon_id: i,
                twitch_peak: 0.02 * (1.0 + i as f64),
                contraction_time: 0.05,
                fatigue_rate: 0.01,
                recovery_rate: 0.002,
                fatigue_factor: 1.0,
                excitability: 1.0,
            })
            .collect()
    }

    #[test]
    fn kernels_are_zero_mean_and_unit_peak() {
        let t = make_templates(&units(30), &GridLayout::default(), &TemplateConfig::default(), 2048.0, 3).unwrap();
        for m in &t {
            assert!(dsp::mean(&m.waveform).abs() < 1e-12);
            let peak = m.waveform.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!((peak - 1.0).abs() < 0.05);
            assert!((20..=31).contains(&m.waveform.len()));
        }
        let again = make_templates(&units(30), &GridLayout::default(), &TemplateConfig::default(), 2048.0, 3).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn spatial_decay_bound() {
        let m = MuapTemplate { unit_id: 0, center: (3.0, 4.0), spatial_decay: 10.0, waveform: vec![0.0], amplitude: 1.0 };
        let g = GridLayout::default();
        // three pitches away = 3 decay lengths
        assert!(m.channel_gain(&g, 3, 7) <= (-4.5f64).exp() + 1e-15);
        assert_eq!(m.channel_gain(&g, 3, 4), 1.0);
    }

    #[test]
    fn silent_noise_free_record_is_zero() {
        let u = units(4);
        let t = make_templates(&u, &GridLayout::default(), &TemplateConfig::default(), 2048.0, 1).unwrap();
        let noise = NoiseConfig { rms_mv: 0.0, ..Default::default() };
        let rec = synthesize_emg(&SpikeTrainSet::empty(4), None, &t, GridLayout::default(), 2048.0, 1.0, noise, 1).unwrap();
        assert!(rec.channels.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn binary_round_trip_and_magic() {
        let rec = EmgGridRecord {
            sample_rate: 2048.0,
            layout: GridLayout { rows: 2, cols: 3, pitch_mm: 10 },
            label: EmgLabel::Clean,
            channels: (0..6).map(|c| (0..5).map(|i| (c * 5 + i) as f64 * 0.1).collect()).collect(),
        };
        let mut a = Vec::new();
        rec.write_binary(&mut a).unwrap();
        let back = EmgGridRecord::read_binary(&a[..]).unwrap();
        let mut b = Vec::new();
        back.write_binary(&mut b).unwrap();
        assert_eq!(a, b);
        let mut bad = a.clone();
        bad[0] = b'X';
        assert!(EmgGridRecord::read_binary(&bad[..]).is_err());
    }

    #[test]
    fn hf_phase_is_exactly_periodic_over_half_seconds() {
        for n in [0usize, 17, 1000, 5000] {
            assert_eq!(burst_phase(n, 2048.0, 30.0), burst_phase(n + 1024, 2048.0, 30.0));
        }
    }
}
