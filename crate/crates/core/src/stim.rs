//! Stimulation waveforms: conventional low-frequency biphasic pulses and
//! kilohertz carrier bursts.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Stimulation protocol tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "LF")]
    Lf,
    #[serde(rename = "HF")]
    Hf,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Lf => "LF",
            Protocol::Hf => "HF",
        }
    }
}

/// Low-frequency biphasic pulse train parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LfParams {
    /// Pulse repetition rate in Hz.
    pub base_frequency: f64,
    /// Width of each phase in seconds.
    pub pulse_width: f64,
    /// Phase amplitude in mA.
    pub amplitude: f64,
}

impl Default for LfParams {
    fn default() -> Self {
        Self { base_frequency: 30.0, pulse_width: 500e-6, amplitude: 5.22 }
    }
}

impl LfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_frequency > 0.0) || !self.base_frequency.is_finite() {
            return Err(invalid("LF base frequency must be positive"));
        }
        if !(self.pulse_width > 0.0) {
            return Err(invalid("LF pulse width must be positive"));
        }
        if 2.0 * self.pulse_width > 1.0 / self.base_frequency {
            return Err(invalid("LF biphasic pulse does not fit in one period"));
        }
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(invalid("LF amplitude must be non-negative"));
        }
        Ok(())
    }
}

/// Kilohertz burst parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HfParams {
    /// Burst repetition rate in Hz.
    pub burst_frequency: f64,
    /// Carrier pulse width in seconds.
    pub pulse_width: f64,
    /// Gap between carrier pulses in seconds.
    pub pulse_interval: f64,
    /// Pulse amplitude in mA.
    pub amplitude: f64,
}

impl Default for HfParams {
    fn default() -> Self {
        Self { burst_frequency: 30.0, pulse_width: 80e-6, pulse_interval: 20e-6, amplitude: 3.55 }
    }
}

impl HfParams {
    pub fn carrier_period(&self) -> f64 {
        self.pulse_width + self.pulse_interval
    }

    pub fn carrier_frequency(&self) -> f64 {
        1.0 / self.carrier_period()
    }

    pub fn duty_cycle(&self) -> f64 {
        self.pulse_width / self.carrier_period()
    }

    /// Positive (and negative) pulses per burst: half the number of whole
    /// carrier periods that fit in one burst period, rounded down.
    pub fn pulses_per_half_burst(&self) -> usize {
        let whole = ((1.0 / self.burst_frequency) / self.carrier_period() + 1e-9).floor();
        (whole as usize) / 2
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.burst_frequency > 0.0) || !self.burst_frequency.is_finite() {
            return Err(invalid("HF burst frequency must be positive"));
        }
        if !(self.pulse_width > 0.0) || !(self.pulse_interval >= 0.0) {
            return Err(invalid("HF pulse width must be positive and interval non-negative"));
        }
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(invalid("HF amplitude must be non-negative"));
        }
        if self.pulses_per_half_burst() == 0 {
            return Err(invalid("HF burst cannot hold one balanced pulse pair"));
        }
        Ok(())
    }
}

/// Protocol parameters of either kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol")]
pub enum StimParams {
    #[serde(rename = "LF")]
    Lf(LfParams),
    #[serde(rename = "HF")]
    Hf(HfParams),
}

impl StimParams {
    pub fn protocol(&self) -> Protocol {
        match self {
            StimParams::Lf(_) => Protocol::Lf,
            StimParams::Hf(_) => Protocol::Hf,
        }
    }

    pub fn amplitude(&self) -> f64 {
        match self {
            StimParams::Lf(p) => p.amplitude,
            StimParams::Hf(p) => p.amplitude,
        }
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        match *self {
            StimParams::Lf(p) => StimParams::Lf(LfParams { amplitude, ..p }),
            StimParams::Hf(p) => StimParams::Hf(HfParams { amplitude, ..p }),
        }
    }

    /// Repetition rate of the stimulus envelope (pulse or burst rate).
    pub fn repetition_frequency(&self) -> f64 {
        match self {
            StimParams::Lf(p) => p.base_frequency,
            StimParams::Hf(p) => p.burst_frequency,
        }
    }

    /// Width of one depolarizing pulse in seconds.
    pub fn pulse_width(&self) -> f64 {
        match self {
            StimParams::Lf(p) => p.pulse_width,
            StimParams::Hf(p) => p.pulse_width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            StimParams::Lf(p) => p.validate(),
            StimParams::Hf(p) => p.validate(),
        }
    }
}

/// A maximal stretch of samples holding one constant, nonzero current.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Run {
    pub start: usize,
    pub len: usize,
    /// Current in mA (signed).
    pub level: f64,
}

/// Sample-level description of a periodic stimulus: the nonzero runs of one
/// period, repeated at period onsets `floor(p * sample_rate / frequency)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSchedule {
    pub sample_rate: f64,
    pub total_samples: usize,
    pub frequency: f64,
    /// Runs with offsets relative to the period onset.
    pub runs: Vec<Run>,
}

impl PulseSchedule {
    pub fn new(params: &StimParams, duration: f64, sample_rate: f64) -> Result<Self> {
        params.validate()?;
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(invalid("duration must be positive"));
        }
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(invalid("sample rate must be positive"));
        }
        let total_samples = (duration * sample_rate).round() as usize;
        let min_period = (sample_rate / params.repetition_frequency() + 1e-9).floor() as usize;
        let mut runs = Vec::new();
        match params {
            StimParams::Lf(p) => {
                if sample_rate < 10.0 / p.pulse_width - 1e-6 {
                    return Err(invalid(format!(
                        "sample rate {sample_rate} Hz undersamples a {} s pulse (need >= 10 samples per phase)",
                        p.pulse_width
                    )));
                }
                let m = (p.pulse_width * sample_rate).round() as usize;
                if 2 * m > min_period {
                    return Err(invalid("LF biphasic pulse does not fit in one period at this sample rate"));
                }
                if p.amplitude > 0.0 {
                    runs.push(Run { start: 0, len: m, level: p.amplitude });
                    runs.push(Run { start: m, len: m, level: -p.amplitude });
                }
            }
            StimParams::Hf(p) => {
                let c = p.carrier_period() * sample_rate;
                let on = p.pulse_width * sample_rate;
                if (c - c.round()).abs() > 1e-6 || (on - on.round()).abs() > 1e-6 {
                    return Err(invalid(format!(
                        "sample rate {sample_rate} Hz is not an integer multiple of the carrier frequency"
                    )));
                }
                let (c, on) = (c.round() as usize, on.round() as usize);
                if on == 0 || c == 0 {
                    return Err(invalid("carrier pulse shorter than one sample"));
                }
                let n = p.pulses_per_half_burst();
                if 2 * n * c > min_period + (c - on) {
                    return Err(invalid("HF burst does not fit in one period at this sample rate"));
                }
                if p.amplitude > 0.0 {
                    for k in 0..n {
                        runs.push(Run { start: k * c, len: on, level: p.amplitude });
                    }
                    for k in 0..n {
                        runs.push(Run { start: (n + k) * c, len: on, level: -p.amplitude });
                    }
                }
            }
        }
        Ok(Self { sample_rate, total_samples, frequency: params.repetition_frequency(), runs })
    }

    /// Onset sample of period `p`.
    pub fn onset(&self, p: usize) -> usize {
        (p as f64 * self.sample_rate / self.frequency + 1e-9).floor() as usize
    }

    /// Number of periods whose onset lies inside the train.
    pub fn num_periods(&self) -> usize {
        let approx = (self.total_samples as f64 * self.frequency / self.sample_rate).ceil() as usize + 1;
        (0..=approx).take_while(|&p| self.onset(p) < self.total_samples).count()
    }

    /// Absolute runs in time order, truncated at the end of the train.
    pub fn iter_runs(&self) -> impl Iterator<Item = Run> + '_ {
        let total = self.total_samples;
        (0..self.num_periods()).flat_map(move |p| {
            let onset = self.onset(p);
            self.runs.iter().filter_map(move |r| {
                let start = onset + r.start;
                if start >= total {
                    return None;
                }
                let len = r.len.min(total - start);
                Some(Run { start, len, level: r.level })
            })
        })
    }

    pub fn render(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.total_samples];
        for r in self.iter_runs() {
            s[r.start..r.start + r.len].fill(r.level);
        }
        s
    }
}

/// A sampled stimulation current waveform with its protocol metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct StimTrain {
    pub sample_rate: f64,
    /// Current in mA.
    pub samples: Vec<f64>,
    pub params: StimParams,
    pub duration: f64,
}

impl StimTrain {
    pub fn protocol(&self) -> Protocol {
        self.params.protocol()
    }

    /// Run-length encoding of the nonzero samples.
    pub fn runs(&self) -> Vec<Run> {
        let mut out = Vec::new();
        let mut i = 0;
        let s = &self.samples;
        while i < s.len() {
            if s[i] == 0.0 {
                i += 1;
                continue;
            }
            let level = s[i];
            let start = i;
            while i < s.len() && s[i] == level {
                i += 1;
            }
            out.push(Run { start, len: i - start, level });
        }
        out
    }

    /// Writes `time_s,current_mA` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time_s,current_mA")?;
        for (i, v) in self.samples.iter().enumerate() {
            writeln!(w, "{},{}", i as f64 / self.sample_rate, v)?;
        }
        Ok(())
    }

    pub fn sidecar(&self) -> StimSidecar {
        self.params.sidecar(self.sample_rate)
    }
}

impl StimParams {
    /// Sidecar metadata for a train of these parameters at `sample_rate`.
    pub fn sidecar(&self, sample_rate: f64) -> StimSidecar {
        let (base, pw, pi, amp) = match *self {
            StimParams::Lf(p) => (p.base_frequency, p.pulse_width, None, p.amplitude),
            StimParams::Hf(p) => (p.burst_frequency, p.pulse_width, Some(p.pulse_interval), p.amplitude),
        };
        StimSidecar {
            protocol: self.protocol(),
            base_frequency_hz: base,
            pulse_width_s: pw,
            pulse_interval_s: pi,
            amplitude_ma: amp,
            sample_rate_hz: sample_rate,
        }
    }
}

/// JSON metadata written next to an exported train.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimSidecar {
    pub protocol: Protocol,
    pub base_frequency_hz: f64,
    pub pulse_width_s: f64,
    pub pulse_interval_s: Option<f64>,
    #[serde(rename = "amplitude_mA")]
    pub amplitude_ma: f64,
    pub sample_rate_hz: f64,
}

fn synthesize(params: StimParams, duration: f64, sample_rate: f64) -> Result<StimTrain> {
    let schedule = PulseSchedule::new(&params, duration, sample_rate)?;
    Ok(StimTrain { sample_rate, samples: schedule.render(), params, duration })
}

/// One biphasic rectangular pulse per period, positive phase first.
pub fn synthesize_lf(params: &LfParams, duration: f64, sample_rate: f64) -> Result<StimTrain> {
    synthesize(StimParams::Lf(*params), duration, sample_rate)
}

/// Per burst period: N positive carrier pulses, then N negative ones, then
/// zero until the next burst.
pub fn synthesize_hf(params: &HfParams, duration: f64, sample_rate: f64) -> Result<StimTrain> {
    synthesize(StimParams::Hf(*params), duration, sample_rate)
}

/// Result of a charge-balance check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChargeBalance {
    /// Net charge in mA·s.
    pub net: f64,
    /// Total absolute charge in mA·s.
    pub total_abs: f64,
    /// Set when |net| exceeds 1e-9 of the absolute charge.
    pub unbalanced: bool,
}

pub fn verify_charge_balance(train: &StimTrain) -> ChargeBalance {
    // Neumaier summation keeps 30M-sample sums exact enough to see 1e-9.
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut abs = 0.0f64;
    for &v in &train.samples {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
        abs += v.abs();
    }
    let net = (sum + comp) / train.sample_rate;
    let total_abs = abs / train.sample_rate;
    ChargeBalance { net, total_abs, unbalanced: net.abs() > 1e-9 * total_abs }
}

/// Fraction of samples carrying nonzero current.
pub fn measure_duty_cycle(train: &StimTrain) -> f64 {
    if train.samples.is_empty() {
        return 0.0;
    }
    let on = train.samples.iter().filter(|&&v| v != 0.0).count();
    on as f64 / train.samples.len() as f64
}
