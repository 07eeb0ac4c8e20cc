//! Motor axon population driven by stimulation current.
//!
//! Each axon is a leaky integrator of rectified current with a hard
//! threshold, reset and absolute refractory period. Larger axons integrate
//! more current per pulse, so under kilohertz bursts they reach threshold
//! after fewer pulses than small ones.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{bad_data, invalid, Error, Result};
use crate::rng;
use crate::stim::{HfParams, PulseSchedule, Run, StimTrain};

/// Skewed diameter range: `d = min + (max - min) * u^(1 + exponent)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiameterDistribution {
    pub min_um: f64,
    pub max_um: f64,
    /// 0 gives a uniform distribution; larger values favor small axons.
    pub exponent: f64,
}

impl Default for DiameterDistribution {
    fn default() -> Self {
        Self { min_um: 5.0, max_um: 20.0, exponent: 1.0 }
    }
}

/// Slowly varying threshold fluctuation: an AR(1) process held for `hold`
/// seconds, clipped at `clip` standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdNoise {
    /// Relative standard deviation of the threshold.
    pub sigma: f64,
    pub correlation_time: f64,
    pub hold: f64,
    pub clip: f64,
}

impl Default for ThresholdNoise {
    fn default() -> Self {
        Self { sigma: 0.1, correlation_time: 5e-3, hold: 1e-3, clip: 3.0 }
    }
}

/// Membrane constants shared by the pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxonConfig {
    /// Depolarization per mA per second for the largest axon.
    pub gain_scale: f64,
    /// Leak time constant at `tau_reference_diameter_um`.
    pub tau_m: f64,
    pub tau_reference_diameter_um: f64,
    /// tau scales as `(d_ref / d)^tau_exponent`; 0 keeps it uniform.
    pub tau_exponent: f64,
    pub threshold: f64,
    pub refractory: f64,
    /// Depolarizing efficacy of anodic (negative) current, in [0, 1).
    pub anodic_efficacy: f64,
    pub noise: ThresholdNoise,
    /// Transient threshold elevation after a spike, relative to threshold.
    pub relative_refractory_magnitude: f64,
    pub relative_refractory_time: f64,
}

impl Default for AxonConfig {
    fn default() -> Self {
        Self {
            gain_scale: 400.0,
            tau_m: 5e-3,
            tau_reference_diameter_um: 12.5,
            tau_exponent: 0.9,
            threshold: 1.0,
            refractory: 5e-3,
            anodic_efficacy: 0.97,
            noise: ThresholdNoise::default(),
            relative_refractory_magnitude: 0.5,
            relative_refractory_time: 0.02,
        }
    }
}

impl AxonConfig {
    /// Noise-free, leak-uniform variant matching the plain integrator.
    pub fn deterministic() -> Self {
        Self {
            tau_exponent: 0.0,
            anodic_efficacy: 0.0,
            noise: ThresholdNoise { sigma: 0.0, ..Default::default() },
            relative_refractory_magnitude: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gain_scale > 0.0) {
            return Err(invalid("gain_scale must be positive"));
        }
        if !(self.tau_m > 0.0) || !(self.tau_reference_diameter_um > 0.0) {
            return Err(invalid("tau_m and reference diameter must be positive"));
        }
        if !(self.threshold > 0.0) || !(self.refractory >= 0.0) {
            return Err(invalid("threshold must be positive and refractory non-negative"));
        }
        if !(0.0..1.0).contains(&self.anodic_efficacy) {
            return Err(invalid("anodic_efficacy must lie in [0, 1)"));
        }
        let n = &self.noise;
        if !(n.sigma >= 0.0) || !(n.correlation_time > 0.0) || !(n.hold > 0.0) || !(n.clip > 0.0) {
            return Err(invalid("threshold noise parameters out of range"));
        }
        if !(self.relative_refractory_magnitude >= 0.0) || !(self.relative_refractory_time > 0.0) {
            return Err(invalid("relative refractory parameters out of range"));
        }
        Ok(())
    }
}

/// One motor axon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axon {
    pub id: usize,
    pub diameter: f64,
    /// Depolarization per mA per second.
    pub gain: f64,
    pub tau_m: f64,
    pub threshold: f64,
    pub refractory: f64,
    pub membrane_v: f64,
}

/// A population of axons ordered by descending diameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxonPool {
    pub axons: Vec<Axon>,
    pub seed: u64,
    pub distribution: DiameterDistribution,
    pub config: AxonConfig,
}

impl AxonPool {
    pub fn len(&self) -> usize {
        self.axons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axons.is_empty()
    }
}

/// Draws a reproducible pool of `n` axons.
pub fn build_pool(n: usize, distribution: &DiameterDistribution, seed: u64, config: &AxonConfig) -> Result<AxonPool> {
    if n == 0 {
        return Err(invalid("pool needs at least one axon"));
    }
    if !(distribution.min_um > 0.0) || !(distribution.min_um < distribution.max_um) {
        return Err(invalid("diameter range must satisfy 0 < min < max"));
    }
    if !(distribution.exponent >= 0.0) {
        return Err(invalid("diameter exponent must be non-negative"));
    }
    config.validate()?;
    let mut r = rng::stream(seed, "axon-diameters", 0);
    let span = distribution.max_um - distribution.min_um;
    let mut d: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = r.random();
            distribution.min_um + span * u.powf(1.0 + distribution.exponent)
        })
        .collect();
    d.sort_by(|a, b| b.total_cmp(a));
    let axons = d
        .into_iter()
        .enumerate()
        .map(|(id, diameter)| Axon {
            id,
            diameter,
            gain: config.gain_scale * diameter / distribution.max_um,
            tau_m: config.tau_m * (config.tau_reference_diameter_um / diameter).powf(config.tau_exponent),
            threshold: config.threshold,
            refractory: config.refractory,
            membrane_v: 0.0,
        })
        .collect();
    Ok(AxonPool { axons, seed, distribution: *distribution, config: *config })
}

/// Spike times per axon, indexed by axon id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpikeTrainSet {
    pub trains: Vec<Vec<f64>>,
}

impl SpikeTrainSet {
    pub fn empty(n: usize) -> Self {
        Self { trains: vec![Vec::new(); n] }
    }

    pub fn total_spikes(&self) -> usize {
        self.trains.iter().map(Vec::len).sum()
    }

    /// Number of units with at least one spike.
    pub fn active_units(&self) -> usize {
        self.trains.iter().filter(|t| !t.is_empty()).count()
    }

    /// All spikes as `(time, unit)` pairs sorted by time, then unit.
    pub fn merged(&self) -> Vec<(f64, usize)> {
        let mut v: Vec<(f64, usize)> = self
            .trains
            .iter()
            .enumerate()
            .flat_map(|(i, t)| t.iter().map(move |&s| (s, i)))
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        v
    }

    /// Writes `axon_id,spike_time_s` rows in time order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "axon_id,spike_time_s")?;
        for (t, i) in self.merged() {
            writeln!(w, "{i},{t}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, n_units: usize) -> Result<Self> {
        let mut set = Self::empty(n_units);
        let mut lines = r.lines();
        match lines.next() {
            Some(Ok(h)) if h.trim() == "axon_id,spike_time_s" => {}
            _ => return Err(bad_data("spike CSV header must be `axon_id,spike_time_s`")),
        }
        for (ln, line) in lines.enumerate() {
            let line = line.map_err(|e| bad_data(e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let (a, b) = line
                .split_once(',')
                .ok_or_else(|| bad_data(format!("spike CSV line {} malformed", ln + 2)))?;
            let id: usize = a.parse().map_err(|_| bad_data(format!("bad axon id on line {}", ln + 2)))?;
            let t: f64 = b.parse().map_err(|_| bad_data(format!("bad spike time on line {}", ln + 2)))?;
            if id >= n_units {
                return Err(bad_data(format!("axon id {id} out of range")));
            }
            set.trains[id].push(t);
        }
        for t in &mut set.trains {
            t.sort_by(f64::total_cmp);
        }
        Ok(set)
    }
}

/// Lazily advanced AR(1) threshold fluctuation for one axon.
struct NoiseState {
    rng: ChaCha8Rng,
    rho: f64,
    clip: f64,
    cell: u64,
    value: f64,
    enabled: bool,
}

impl NoiseState {
    fn new(noise: &ThresholdNoise, master: u64, axon: usize) -> Self {
        let mut rng = rng::stream(master, "threshold-noise", axon as u64);
        let enabled = noise.sigma > 0.0;
        let value = if enabled { rng.sample::<f64, _>(StandardNormal).clamp(-noise.clip, noise.clip) } else { 0.0 };
        Self { rng, rho: (-noise.hold / noise.correlation_time).exp(), clip: noise.clip, cell: 0, value, enabled }
    }

    fn at(&mut self, cell: u64) -> f64 {
        if !self.enabled {
            return 0.0;
        }
        if cell > self.cell {
            let rk = self.rho.powf((cell - self.cell) as f64);
            let z: f64 = self.rng.sample(StandardNormal);
            self.value = (rk * self.value + (1.0 - rk * rk).sqrt() * z).clamp(-self.clip, self.clip);
            self.cell = cell;
        }
        self.value
    }
}

/// Powers of the per-step leak factor, tabulated for short spans.
struct LeakTable {
    a: f64,
    step_over_tau: f64,
    table: Vec<f64>,
}

impl LeakTable {
    const SIZE: usize = 4096;

    fn new(dt: f64, tau: f64) -> Self {
        let step_over_tau = dt / tau;
        let table = if tau.is_finite() {
            (0..Self::SIZE).map(|n| (-(n as f64) * step_over_tau).exp()).collect()
        } else {
            Vec::new()
        };
        Self { a: (-step_over_tau).exp(), step_over_tau, table }
    }

    fn leak_free(&self) -> bool {
        self.table.is_empty()
    }

    fn pow(&self, n: u64) -> f64 {
        if self.leak_free() {
            1.0
        } else if (n as usize) < Self::SIZE {
            self.table[n as usize]
        } else {
            (-(n as f64) * self.step_over_tau).exp()
        }
    }
}

/// Integrates one axon over time-ordered runs of constant current.
struct AxonIntegrator<'a> {
    axon: &'a Axon,
    cfg: &'a AxonConfig,
    leak: LeakTable,
    dt: f64,
    steps_per_second: f64,
    steps_per_cell: u64,
    refractory_steps: u64,
    noise: NoiseState,
    v: f64,
    cursor: u64,
    allowed_from: u64,
    last_spike: Option<f64>,
    spikes: Vec<f64>,
}

impl<'a> AxonIntegrator<'a> {
    fn new(axon: &'a Axon, cfg: &'a AxonConfig, steps_per_second: f64, noise_seed: u64) -> Self {
        let dt = 1.0 / steps_per_second;
        Self {
            axon,
            cfg,
            leak: LeakTable::new(dt, axon.tau_m),
            dt,
            steps_per_second,
            steps_per_cell: ((cfg.noise.hold * steps_per_second).round() as u64).max(1),
            refractory_steps: (axon.refractory * steps_per_second).round() as u64,
            noise: NoiseState::new(&cfg.noise, noise_seed, axon.id),
            v: 0.0,
            cursor: 0,
            allowed_from: 0,
            last_spike: None,
            spikes: Vec::new(),
        }
    }

    fn step_time(&self, step: u64) -> f64 {
        step as f64 / self.steps_per_second
    }

    /// Threshold tested at the end of step `k`, excluding the relative
    /// refractory term when `with_recovery` is false.
    fn threshold(&self, k: u64, xi: f64, with_recovery: bool) -> f64 {
        let mut th = 1.0 + self.cfg.noise.sigma * xi;
        if with_recovery && self.cfg.relative_refractory_magnitude > 0.0 {
            if let Some(last) = self.last_spike {
                let age = self.step_time(k + 1) - last;
                th += self.cfg.relative_refractory_magnitude * (-age / self.cfg.relative_refractory_time).exp();
            }
        }
        self.axon.threshold * th
    }

    /// Membrane value after `j` steps of drive `b` from `v0`.
    #[inline]
    fn evolve(&self, v0: f64, b: f64, j: u64) -> f64 {
        if self.leak.leak_free() {
            v0 + b * j as f64
        } else {
            let f = b / (1.0 - self.leak.a);
            f + (v0 - f) * self.leak.pow(j)
        }
    }

    fn advance_to(&mut self, step: u64) {
        if step > self.cursor {
            if self.v != 0.0 {
                self.v *= self.leak.pow(step - self.cursor);
            }
            self.cursor = step;
        }
    }

    fn fire(&mut self, k: u64) {
        let t = self.step_time(k + 1);
        self.spikes.push(t);
        self.last_spike = Some(t);
        self.v = 0.0;
        self.cursor = k + 1;
        self.allowed_from = k + 1 + self.refractory_steps;
    }

    /// Processes steps `[k0, k1)` under constant rectified current `drive`.
    fn drive(&mut self, k0: u64, k1: u64, drive: f64) {
        let b = self.axon.gain * drive * self.dt;
        let mut k = k0;
        while k < k1 {
            self.advance_to(k);
            if k < self.allowed_from {
                // Refractory: the membrane is clamped at rest.
                self.v = 0.0;
                k = self.allowed_from.min(k1);
                self.cursor = k;
                continue;
            }
            let cell = k / self.steps_per_cell;
            let end = ((cell + 1) * self.steps_per_cell).min(k1);
            let xi = self.noise.at(cell);
            let n = end - k;
            let v0 = self.v;
            let rising = self.leak.leak_free() || v0 <= b / (1.0 - self.leak.a);
            let v_end = self.evolve(v0, b, n);
            let mut crossing = None;
            if rising {
                // Membrane rises while the threshold can only relax, so a
                // crossing anywhere implies one at the chunk end.
                if v_end >= self.threshold(end - 1, xi, false) && v_end >= self.threshold(end - 1, xi, true) {
                    crossing = (1..=n).find(|&j| self.evolve(v0, b, j) >= self.threshold(k + j - 1, xi, true));
                }
            } else {
                crossing = (1..=n).find(|&j| self.evolve(v0, b, j) >= self.threshold(k + j - 1, xi, true));
            }
            match crossing {
                Some(j) => {
                    self.fire(k + j - 1);
                    k += j;
                }
                None => {
                    self.v = v_end;
                    self.cursor = end;
                    k = end;
                }
            }
        }
    }
}

/// Pool dynamics over an explicit run sequence (sample indices at
/// `sample_rate`, each sample split into `substeps` integration steps).
pub fn simulate_runs(
    pool: &AxonPool,
    runs: &[Run],
    sample_rate: f64,
    substeps: u64,
    noise_seed: u64,
) -> SpikeTrainSet {
    simulate_with(pool, || runs.iter().copied(), sample_rate, substeps, noise_seed)
}

fn simulate_with<I: Iterator<Item = Run>>(
    pool: &AxonPool,
    runs: impl Fn() -> I,
    sample_rate: f64,
    substeps: u64,
    noise_seed: u64,
) -> SpikeTrainSet {
    let cfg = &pool.config;
    let steps_per_second = sample_rate * substeps as f64;
    let trains = pool
        .axons
        .iter()
        .map(|axon| {
            let mut it = AxonIntegrator::new(axon, cfg, steps_per_second, noise_seed);
            it.v = axon.membrane_v;
            for r in runs() {
                let drive = r.level.max(0.0) + cfg.anodic_efficacy * (-r.level).max(0.0);
                if drive == 0.0 {
                    continue;
                }
                let k0 = r.start as u64 * substeps;
                it.drive(k0, k0 + r.len as u64 * substeps, drive);
            }
            it.spikes
        })
        .collect();
    SpikeTrainSet { trains }
}

/// Simulates the pool under `train` with integration step `dt`.
///
/// `dt` must divide the sample period of the train and be no longer than a
/// quarter of the pulse width. Threshold noise uses the stream keyed by
/// `noise_seed`.
pub fn simulate_pool(pool: &AxonPool, train: &StimTrain, dt: f64, noise_seed: u64) -> Result<SpikeTrainSet> {
    let ratio = 1.0 / (dt * train.sample_rate);
    if !(dt > 0.0) || (ratio - ratio.round()).abs() > 1e-6 || ratio.round() < 1.0 {
        return Err(invalid("dt must divide the train's sample period"));
    }
    if dt > train.params.pulse_width() / 4.0 + 1e-15 {
        return Err(invalid("dt must not exceed a quarter of the pulse width"));
    }
    Ok(simulate_runs(pool, &train.runs(), train.sample_rate, ratio.round() as u64, noise_seed))
}

/// Same dynamics as [`simulate_pool`] driven directly by a schedule, one
/// integration step per sample.
pub fn simulate_schedule(pool: &AxonPool, schedule: &PulseSchedule, noise_seed: u64) -> SpikeTrainSet {
    simulate_with(pool, || schedule.iter_runs(), schedule.sample_rate, 1, noise_seed)
}

/// Carrier pulses an axon at rest needs before its first spike under HF
/// bursts, counting only pulses with nonzero depolarizing efficacy.
///
/// Uses the exact continuous-time integrator response to each rectangle and
/// ignores threshold noise. Returns `None` when the periodic steady state
/// stays below threshold.
pub fn pulses_to_first_spike(axon: &Axon, params: &HfParams, amplitude: f64, anodic_efficacy: f64) -> Option<usize> {
    let n = params.pulses_per_half_burst();
    if amplitude <= 0.0 || axon.gain <= 0.0 || n == 0 {
        return None;
    }
    let tau = axon.tau_m;
    let leaky = tau.is_finite();
    let decay = |t: f64| if leaky { (-t / tau).exp() } else { 1.0 };
    let pulse = |v: f64, current: f64| {
        if leaky {
            let e = decay(params.pulse_width);
            v * e + axon.gain * current * tau * (1.0 - e)
        } else {
            v + axon.gain * current * params.pulse_width
        }
    };
    let polarity = [(amplitude, 1.0), (amplitude * anodic_efficacy, 0.0)];
    let interval = decay(params.pulse_interval);
    // Silence from the end of the burst's last interval to the next onset.
    let gap = decay(1.0 / params.burst_frequency - 2.0 * n as f64 * params.carrier_period());
    let mut v = 0.0f64;
    let mut count = 0usize;
    const MAX_PULSES: usize = 100_000_000;
    loop {
        let start = v;
        for &(current, _) in &polarity {
            for _ in 0..n {
                if current > 0.0 {
                    v = pulse(v, current);
                    count += 1;
                    if v >= axon.threshold {
                        return Some(count);
                    }
                } else if leaky {
                    v *= decay(params.pulse_width);
                }
                v *= interval;
            }
        }
        v *= gap;
        if leaky && (v - start).abs() <= 1e-14 * v.abs() {
            return None;
        }
        if count >= MAX_PULSES {
            return None;
        }
    }
}

/// Phase locking of pooled spikes to `lock_frequency`.
pub fn vector_strength(spikes: &SpikeTrainSet, lock_frequency: f64) -> Result<f64> {
    let (mut c, mut s, mut k) = (0.0f64, 0.0f64, 0usize);
    let w = 2.0 * std::f64::consts::PI * lock_frequency;
    for t in spikes.trains.iter().flatten() {
        let phase = w * t;
        c += phase.cos();
        s += phase.sin();
        k += 1;
    }
    if k == 0 {
        return Err(Error::InvalidData("vector strength of an empty spike set is undefined".into()));
    }
    Ok((c * c + s * s).sqrt() / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stim::{synthesize_hf, synthesize_lf, LfParams};

    fn leak_free_axon(gain: f64) -> Axon {
        Axon { id: 0, diameter: 10.0, gain, tau_m: f64::INFINITY, threshold: 1.0, refractory: 5e-3, membrane_v: 0.0 }
    }

    fn single(axon: Axon, cfg: AxonConfig) -> AxonPool {
        AxonPool { axons: vec![axon], seed: 0, distribution: DiameterDistribution::default(), config: cfg }
    }

    #[test]
    fn pool_is_reproducible_and_ordered() {
        let cfg = AxonConfig::default();
        let a = build_pool(120, &DiameterDistribution::default(), 7, &cfg).unwrap();
        let b = build_pool(120, &DiameterDistribution::default(), 7, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.axons.windows(2).all(|w| w[0].diameter >= w[1].diameter && w[0].gain >= w[1].gain));
        assert!(a.axons.iter().all(|x| (5.0..=20.0).contains(&x.diameter)));
        assert!(build_pool(0, &DiameterDistribution::default(), 7, &cfg).is_err());
        let inverted = DiameterDistribution { min_um: 20.0, max_um: 5.0, exponent: 0.0 };
        assert!(build_pool(3, &inverted, 7, &cfg).is_err());
    }

    #[test]
    fn zero_amplitude_gives_no_spikes() {
        let pool = build_pool(20, &DiameterDistribution::default(), 1, &AxonConfig::default()).unwrap();
        let t = synthesize_hf(&HfParams { amplitude: 0.0, ..Default::default() }, 0.5, 1e5).unwrap();
        assert_eq!(simulate_pool(&pool, &t, 1e-5, 3).unwrap().total_spikes(), 0);
    }

    #[test]
    fn leak_free_first_spike_matches_closed_form() {
        // increment per pulse 0.07 -> ceil(1 / 0.07) = 15 pulses
        let gain = 0.07 / (2.0 * 80e-6);
        let axon = leak_free_axon(gain);
        let hf = HfParams { amplitude: 2.0, ..Default::default() };
        assert_eq!(pulses_to_first_spike(&axon, &hf, 2.0, 0.0), Some(15));
        let train = synthesize_hf(&hf, 0.01, 1e5).unwrap();
        let s = simulate_pool(&single(axon, AxonConfig::deterministic()), &train, 1e-5, 0).unwrap();
        // 14 full pulses leave 0.98; the 15th crosses after ceil(0.02 / 0.00875) = 3 of its 8 steps
        assert!((s.trains[0][0] - (14.0 * 100e-6 + 30e-6)).abs() < 1e-12);
    }

    #[test]
    fn substeps_do_not_change_leak_free_timing() {
        let axon = leak_free_axon(0.05 / (2.0 * 80e-6));
        let hf = HfParams { amplitude: 2.0, ..Default::default() };
        let train = synthesize_hf(&hf, 0.02, 1e5).unwrap();
        let pool = single(axon, AxonConfig::deterministic());
        let a = simulate_pool(&pool, &train, 1e-5, 0).unwrap();
        let b = simulate_pool(&pool, &train, 5e-6, 0).unwrap();
        assert_eq!(a.trains[0].len(), b.trains[0].len());
        for (x, y) in a.trains[0].iter().zip(&b.trains[0]) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_incompatible_dt() {
        let pool = build_pool(2, &DiameterDistribution::default(), 1, &AxonConfig::default()).unwrap();
        let t = synthesize_lf(&LfParams::default(), 0.1, 1e5).unwrap();
        assert!(simulate_pool(&pool, &t, 3e-5, 0).is_err());
        assert!(simulate_pool(&pool, &t, 2.5e-4, 0).is_err());
    }

    #[test]
    fn subthreshold_steady_state_returns_none() {
        let axon = Axon { tau_m: 1e-3, gain: 10.0, ..leak_free_axon(1.0) };
        assert_eq!(pulses_to_first_spike(&axon, &HfParams::default(), 1.0, 0.0), None);
        assert_eq!(pulses_to_first_spike(&axon, &HfParams::default(), 0.0, 0.0), None);
    }

    #[test]
    fn vector_strength_limits() {
        let locked = SpikeTrainSet { trains: vec![(0..30).map(|k| k as f64 / 30.0 + 1e-3).collect()] };
        assert!((vector_strength(&locked, 30.0).unwrap() - 1.0).abs() < 1e-12);
        let spread = SpikeTrainSet { trains: vec![(0..300).map(|k| k as f64 / 300.0 / 30.0).collect()] };
        assert!(vector_strength(&spread, 30.0).unwrap() < 1e-9);
        assert!(vector_strength(&SpikeTrainSet::empty(3), 30.0).is_err());
    }

    #[test]
    fn refractory_is_respected() {
        let pool = build_pool(60, &DiameterDistribution::default(), 4, &AxonConfig::default()).unwrap();
        let t = synthesize_hf(&HfParams { amplitude: 3.0, ..Default::default() }, 1.0, 1e5).unwrap();
        let s = simulate_pool(&pool, &t, 1e-5, 9).unwrap();
        assert!(s.total_spikes() > 0);
        for (a, train) in pool.axons.iter().zip(&s.trains) {
            assert!(train.windows(2).all(|w| w[1] - w[0] >= a.refractory - 1e-12));
        }
    }

    #[test]
    fn spike_csv_round_trip() {
        let s = SpikeTrainSet { trains: vec![vec![0.1, 0.25], vec![], vec![0.2]] };
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = SpikeTrainSet::read_csv(&buf[..], 3).unwrap();
        assert_eq!(back, s);
        let mut again = Vec::new();
        back.write_csv(&mut again).unwrap();
        assert_eq!(buf, again);
    }
}
