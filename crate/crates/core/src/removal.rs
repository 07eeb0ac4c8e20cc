//! Stimulation artifact removal: peak replacement for LF recordings and
//! block-wise template subtraction for HF recordings.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::emg::{EmgGridRecord, EmgLabel};
use crate::error::{bad_data, invalid, Result};
use crate::rng;

/// How successive LF events are predicted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LfDetection {
    /// Search windows sit on a fixed stimulus clock whose phase is estimated
    /// from the whole channel.
    StimulusClock,
    /// Each search window is centered one interval after the previously
    /// detected peak.
    Chained,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LfRemovalParams {
    pub stim_frequency: f64,
    pub search_margin: f64,
    pub replace_window: f64,
    pub detection: LfDetection,
}

impl Default for LfRemovalParams {
    fn default() -> Self {
        Self { stim_frequency: 30.0, search_margin: 2.5e-3, replace_window: 5e-3, detection: LfDetection::StimulusClock }
    }
}

impl LfRemovalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.stim_frequency > 0.0) || !(self.search_margin >= 0.0) || !(self.replace_window > 0.0) {
            return Err(invalid("LF removal parameters must be positive"));
        }
        if self.replace_window >= 1.0 / self.stim_frequency || 2.0 * self.search_margin >= 1.0 / self.stim_frequency {
            return Err(invalid("replacement window and search range must fit in one interstimulus interval"));
        }
        Ok(())
    }
}

fn argmax_abs(x: &[f64], lo: usize, hi: usize) -> usize {
    let mut best = lo;
    for i in lo..hi {
        if x[i].abs() > x[best].abs() {
            best = i;
        }
    }
    best
}

/// Phase (in samples, within one interval) of the stimulus clock, from the
/// circular centroid of the channel's energy folded at the stimulus period.
fn clock_phase(x: &[f64], period: f64) -> f64 {
    let (mut c, mut s) = (0.0, 0.0);
    for (i, v) in x.iter().enumerate() {
        let theta = 2.0 * std::f64::consts::PI * (i as f64 / period).fract();
        let w = v * v;
        c += w * theta.cos();
        s += w * theta.sin();
    }
    s.atan2(c).rem_euclid(2.0 * std::f64::consts::PI) / (2.0 * std::f64::consts::PI) * period
}

/// Sample indices of LF artifact peaks (largest absolute value).
pub fn detect_lf_artifacts(x: &[f64], sample_rate: f64, params: &LfRemovalParams) -> Result<Vec<usize>> {
    params.validate()?;
    let period = sample_rate / params.stim_frequency;
    let first_end = period.ceil() as usize;
    if x.len() < first_end {
        return Err(bad_data("channel is shorter than one interstimulus interval"));
    }
    let margin = (params.search_margin * sample_rate).round() as isize;
    let n = x.len() as isize;
    let search = |center: f64| -> Option<usize> {
        let c = center.round() as isize;
        let lo = (c - margin).max(0);
        let hi = (c + margin + 1).min(n);
        (lo < hi).then(|| argmax_abs(x, lo as usize, hi as usize))
    };
    let mut events = Vec::new();
    match params.detection {
        LfDetection::Chained => {
            let mut prev = argmax_abs(x, 0, first_end);
            events.push(prev);
            while let Some(e) = search(prev as f64 + period) {
                if e <= prev {
                    break;
                }
                events.push(e);
                prev = e;
            }
        }
        LfDetection::StimulusClock => {
            let phase = clock_phase(x, period);
            let mut k = 0usize;
            loop {
                let center = phase + k as f64 * period;
                if center.round() as isize - margin >= n {
                    break;
                }
                if let Some(e) = search(center) {
                    if events.last().is_none_or(|&p| e > p) {
                        events.push(e);
                    }
                }
                k += 1;
            }
        }
    }
    Ok(events)
}

/// Per-channel outcome of a removal pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelReport {
    pub channel: usize,
    pub events_detected: usize,
    /// `10 log10(E_in / E_out)`, the energy the pass removed.
    #[serde(with = "crate::nonfinite")]
    pub energy_reduction_db: f64,
    /// Ground-truth artifact attenuation when the artifact is known.
    #[serde(with = "crate::nonfinite::option")]
    pub attenuation_db: Option<f64>,
    pub outliers_replaced: usize,
    pub flags: Vec<String>,
}

/// JSON-serializable summary of a removal run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalReport {
    pub protocol: String,
    pub channels: Vec<ChannelReport>,
    pub flags: Vec<String>,
}

impl RemovalReport {
    /// Fills ground-truth attenuation: artifact energy over the energy of
    /// `cleaned - clean`.
    pub fn attach_ground_truth(&mut self, cleaned: &EmgGridRecord, clean: &EmgGridRecord, artifact: &[Vec<f64>]) {
        for (r, ((y, c), a)) in self.channels.iter_mut().zip(cleaned.channels.iter().zip(&clean.channels).zip(artifact)) {
            r.attenuation_db = Some(attenuation_db(a, y, c));
        }
    }

    pub fn mean_attenuation_db(&self) -> Option<f64> {
        let v: Option<Vec<f64>> = self.channels.iter().map(|c| c.attenuation_db).collect();
        v.filter(|v| !v.is_empty()).map(|v| dsp::mean(&v))
    }
}

/// `10 log10(Σ artifact² / Σ (cleaned − clean)²)`.
pub fn attenuation_db(artifact: &[f64], cleaned: &[f64], clean: &[f64]) -> f64 {
    let ea: f64 = artifact.iter().map(|v| v * v).sum();
    let er: f64 = cleaned.iter().zip(clean).map(|(y, c)| (y - c) * (y - c)).sum();
    10.0 * (ea / er).log10()
}

fn energy_reduction_db(before: &[f64], after: &[f64]) -> f64 {
    let eb: f64 = before.iter().map(|v| v * v).sum();
    let ea: f64 = after.iter().map(|v| v * v).sum();
    if eb == 0.0 && ea == 0.0 {
        0.0
    } else {
        10.0 * (eb / ea).log10()
    }
}

/// Replaces a window around every detected LF artifact with a randomly
/// placed slice of rest-state EMG from the same channel. Samples outside the
/// windows are left untouched.
pub fn remove_lf(
    emg: &EmgGridRecord,
    params: &LfRemovalParams,
    baseline: &[Vec<f64>],
    seed: u64,
) -> Result<(EmgGridRecord, RemovalReport)> {
    emg.validate()?;
    params.validate()?;
    let w = ((params.replace_window * emg.sample_rate).round() as usize).max(1);
    if baseline.len() != emg.channels.len() {
        return Err(invalid(format!("baseline has {} channels, record has {}", baseline.len(), emg.channels.len())));
    }
    if baseline.iter().any(|b| b.len() < w) {
        return Err(invalid("baseline segment shorter than the replacement window"));
    }
    let half = w / 2;
    let mut channels = Vec::with_capacity(emg.channels.len());
    let mut reports = Vec::with_capacity(emg.channels.len());
    for (c, (x, base)) in emg.channels.iter().zip(baseline).enumerate() {
        let events = detect_lf_artifacts(x, emg.sample_rate, params)?;
        let mut r = rng::stream(seed, "lf-baseline", c as u64);
        let mut y = x.clone();
        for &e in &events {
            let lo = e.saturating_sub(half);
            let hi = (lo + w).min(y.len());
            let start = r.random_range(0..=base.len() - w);
            y[lo..hi].copy_from_slice(&base[start..start + (hi - lo)]);
        }
        reports.push(ChannelReport {
            channel: c,
            events_detected: events.len(),
            energy_reduction_db: energy_reduction_db(x, &y),
            attenuation_db: None,
            outliers_replaced: 0,
            flags: Vec::new(),
        });
        channels.push(y);
    }
    Ok((
        EmgGridRecord { channels, label: EmgLabel::Clean, ..emg.clone() },
        RemovalReport { protocol: "LF".into(), channels: reports, flags: Vec::new() },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HfRemovalParams {
    /// Segment length in seconds.
    pub window: f64,
    /// Segment hop in seconds.
    pub step: f64,
    /// Segments per averaging block.
    pub group: usize,
    /// Alignment search range in samples, both directions.
    pub max_shift: usize,
    /// Fewest segments a trailing block needs to be processed.
    pub min_segments: usize,
}

impl Default for HfRemovalParams {
    fn default() -> Self {
        Self { window: 0.5, step: 0.5, group: 8, max_shift: 10, min_segments: 2 }
    }
}

impl HfRemovalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.window > 0.0) || self.step != self.window {
            return Err(invalid("HF removal needs non-overlapping windows (step = window > 0)"));
        }
        if self.group == 0 || self.min_segments == 0 {
            return Err(invalid("group and min_segments must be at least 1"));
        }
        Ok(())
    }
}

/// Average of equally long segments, sample by sample.
pub fn extract_hf_template(segments: &[&[f64]]) -> Result<Vec<f64>> {
    let len = segments.first().map(|s| s.len()).ok_or_else(|| invalid("no segments to average"))?;
    if segments.iter().any(|s| s.len() != len) {
        return Err(invalid("segments differ in length"));
    }
    let mut t = vec![0.0; len];
    for s in segments {
        for (a, b) in t.iter_mut().zip(*s) {
            *a += b;
        }
    }
    let k = segments.len() as f64;
    t.iter_mut().for_each(|v| *v /= k);
    Ok(t)
}

/// Result of fitting a template to a segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub shift: isize,
    pub gain: f64,
    pub cleaned: Vec<f64>,
}

/// Fits `gain * template` circularly shifted by an integer within
/// `±max_shift` to the segment in the least-squares sense and subtracts it.
/// Equal fits prefer the smaller shift, and zero before negative before
/// positive.
pub fn align_and_subtract(segment: &[f64], template: &[f64], max_shift: usize) -> Result<Alignment> {
    let n = segment.len();
    if template.len() != n {
        return Err(invalid("template and segment lengths differ"));
    }
    if n == 0 {
        return Ok(Alignment { shift: 0, gain: 0.0, cleaned: Vec::new() });
    }
    let energy: f64 = template.iter().map(|v| v * v).sum();
    if energy == 0.0 {
        return Ok(Alignment { shift: 0, gain: 0.0, cleaned: segment.to_vec() });
    }
    let k = max_shift.min(n - 1) as isize;
    let dot = |s: isize| -> f64 {
        // shifted[i] = template[(i - s) mod n]
        let s = s.rem_euclid(n as isize) as usize;
        let (head, tail) = segment.split_at(s);
        let a: f64 = tail.iter().zip(template).map(|(x, t)| x * t).sum();
        let b: f64 = head.iter().zip(&template[n - s..]).map(|(x, t)| x * t).sum();
        a + b
    };
    let mut best = (0isize, dot(0));
    for m in 1..=k {
        for s in [-m, m] {
            let d = dot(s);
            if d * d > best.1 * best.1 {
                best = (s, d);
            }
        }
    }
    let gain = best.1 / energy;
    let s = best.0.rem_euclid(n as isize) as usize;
    let cleaned = (0..n).map(|i| segment[i] - gain * template[(i + n - s) % n]).collect();
    Ok(Alignment { shift: best.0, gain, cleaned })
}

/// Outcome of [`smooth_outliers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Smoothed {
    pub values: Vec<f64>,
    pub replaced: Vec<usize>,
    /// Set when every sample was an outlier; values are then unchanged.
    pub all_outliers: bool,
}

/// Replaces samples outside mean ± 3 standard deviations (sample standard
/// deviation of the input) with the average of the nearest non-outlier on
/// each side, or the single nearest one at the edges.
pub fn smooth_outliers(v: &[f64]) -> Result<Smoothed> {
    if v.is_empty() {
        return Err(invalid("cannot smooth an empty vector"));
    }
    let m = dsp::mean(v);
    let sd = if v.len() > 1 { (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt() } else { 0.0 };
    let (lo, hi) = (m - 3.0 * sd, m + 3.0 * sd);
    let out: Vec<bool> = v.iter().map(|&x| x < lo || x > hi).collect();
    let replaced: Vec<usize> = (0..v.len()).filter(|&i| out[i]).collect();
    if replaced.len() == v.len() {
        return Ok(Smoothed { values: v.to_vec(), replaced: Vec::new(), all_outliers: true });
    }
    let mut values = v.to_vec();
    let mut i = 0;
    while i < v.len() {
        if !out[i] {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < v.len() && out[j] {
            j += 1;
        }
        let fill = match (i.checked_sub(1), (j < v.len()).then_some(j)) {
            (Some(a), Some(b)) => 0.5 * (v[a] + v[b]),
            (Some(a), None) => v[a],
            (None, Some(b)) => v[b],
            (None, None) => unreachable!(),
        };
        values[i..j].iter_mut().for_each(|x| *x = fill);
        i = j;
    }
    Ok(Smoothed { values, replaced, all_outliers: false })
}

/// Cleans one channel; returns (output, outliers replaced, flags).
pub fn remove_hf_channel(x: &[f64], sample_rate: f64, params: &HfRemovalParams) -> Result<(Vec<f64>, usize, Vec<String>)> {
    params.validate()?;
    let seg = (params.window * sample_rate).round() as usize;
    if seg == 0 {
        return Err(invalid("window shorter than one sample"));
    }
    let mut y = x.to_vec();
    let mut flags = Vec::new();
    let mut outliers = 0;
    let segments = x.len() / seg;
    let mut first = 0;
    while first < segments {
        let count = params.group.min(segments - first);
        let lo = first * seg;
        let hi = (first + count) * seg;
        if count < params.min_segments {
            flags.push(format!("trailing block of {count} segment(s) at sample {lo} passed through"));
            break;
        }
        if count < params.group {
            flags.push(format!("trailing block processed with {count} segments"));
        }
        let parts: Vec<&[f64]> = x[lo..hi].chunks_exact(seg).collect();
        let template = extract_hf_template(&parts)?;
        let mut block = Vec::with_capacity(hi - lo);
        for p in &parts {
            block.extend(align_and_subtract(p, &template, params.max_shift)?.cleaned);
        }
        let s = smooth_outliers(&block)?;
        if s.all_outliers {
            flags.push(format!("block at sample {lo}: every sample flagged as outlier"));
        }
        outliers += s.replaced.len();
        y[lo..hi].copy_from_slice(&s.values);
        first += count;
    }
    if !x.len().is_multiple_of(seg) {
        flags.push(format!("{} trailing sample(s) shorter than one window passed through", x.len() % seg));
    }
    Ok((y, outliers, flags))
}

/// Block-wise template subtraction over every channel.
pub fn remove_hf(emg: &EmgGridRecord, params: &HfRemovalParams) -> Result<(EmgGridRecord, RemovalReport)> {
    emg.validate()?;
    let mut channels = Vec::with_capacity(emg.channels.len());
    let mut reports = Vec::with_capacity(emg.channels.len());
    for (c, x) in emg.channels.iter().enumerate() {
        let (y, outliers, flags) = remove_hf_channel(x, emg.sample_rate, params)?;
        reports.push(ChannelReport {
            channel: c,
            events_detected: 0,
            energy_reduction_db: energy_reduction_db(x, &y),
            attenuation_db: None,
            outliers_replaced: outliers,
            flags,
        });
        channels.push(y);
    }
    Ok((
        EmgGridRecord { channels, label: EmgLabel::Clean, ..emg.clone() },
        RemovalReport { protocol: "HF".into(), channels: reports, flags: Vec::new() },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn align_recovers_gain_and_shift() {
        let t: Vec<f64> = (0..1024).map(|i| ((i as f64) * 0.37).sin() + 0.2 * ((i as f64) * 0.05).cos()).collect();
        let n = t.len();
        let seg: Vec<f64> = (0..n).map(|i| 0.9 * t[(i + n - 3) % n]).collect();
        let a = align_and_subtract(&seg, &t, 10).unwrap();
        assert_eq!(a.shift, 3);
        assert!((a.gain - 0.9).abs() < 1e-12);
        assert!(a.cleaned.iter().all(|v| v.abs() <= 1e-9));
    }

    #[test]
    fn adjacent_outliers_share_bracketing_average() {
        let mut v: Vec<f64> = (0..200).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.1).collect();
        v[50] = 100.0;
        v[51] = 100.0;
        let s = smooth_outliers(&v).unwrap();
        assert_eq!(s.replaced, vec![50, 51]);
        let fill = 0.5 * (v[49] + v[52]);
        assert_eq!(s.values[50], fill);
        assert_eq!(s.values[51], fill);
    }

    #[test]
    fn boundary_outlier_takes_single_neighbor() {
        let mut v: Vec<f64> = (0..200).map(|i| ((i * 13 % 7) as f64 - 3.0) * 0.1).collect();
        v[0] = -80.0;
        let s = smooth_outliers(&v).unwrap();
        assert_eq!(s.values[0], v[1]);
    }

    #[test]
    fn chained_detection_finds_regular_events() {
        let fs = 2048.0;
        let mut x = vec![0.0; 4096];
        let truth: Vec<usize> = (0..60).map(|k| (10.0 + k as f64 * fs / 30.0).round() as usize).filter(|&e| e < 4096).collect();
        for &e in &truth {
            x[e] = 5.0;
        }
        for mode in [LfDetection::Chained, LfDetection::StimulusClock] {
            let p = LfRemovalParams { detection: mode, ..Default::default() };
            let d = detect_lf_artifacts(&x, fs, &p).unwrap();
            assert_eq!(d, truth, "{mode:?}");
        }
    }
}
