//! Twitch superposition, rate-dependent fatigue, amplitude calibration and
//! the voluntary (effort-compensating) contraction.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::axon::{AxonPool, SpikeTrainSet};
use crate::error::{bad_data, invalid, Error, Result};
use crate::rng;

/// Mapping from axon diameter to motor unit contractile properties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitConfig {
    /// Twitch peak of the smallest unit in newtons.
    pub twitch_peak_min: f64,
    /// Ratio of largest to smallest twitch peak.
    pub twitch_peak_range: f64,
    /// Contraction time of the smallest unit in seconds.
    pub contraction_time_max: f64,
    /// Contraction time scales as `(P_min / P)^contraction_time_exponent`.
    pub contraction_time_exponent: f64,
    /// Fatigue rate of the largest unit; proportional to twitch peak.
    pub fatigue_rate_max: f64,
    pub recovery_rate: f64,
}

impl Default for UnitConfig {
    fn default() -> Self {
        Self {
            twitch_peak_min: 0.02,
            twitch_peak_range: 30.0,
            contraction_time_max: 0.09,
            contraction_time_exponent: 1.0 / 4.2,
            fatigue_rate_max: 0.03,
            recovery_rate: 0.002,
        }
    }
}

/// Pool-wide constants of the fatigue and excitability laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FatigueParams {
    pub phi_min: f64,
    pub rate_max: f64,
    /// Time constant of the leaky spike-rate estimate driving fatigue.
    pub rate_time_constant: f64,
    /// Fraction of `rate_max` above which membrane excitability depresses.
    pub excitability_threshold: f64,
    pub excitability_depression_rate: f64,
    pub excitability_floor: f64,
    pub excitability_recovery_rate: f64,
}

impl Default for FatigueParams {
    fn default() -> Self {
        Self {
            phi_min: 0.2,
            rate_max: 40.0,
            rate_time_constant: 0.5,
            excitability_threshold: 0.45,
            excitability_depression_rate: 0.01,
            excitability_floor: 0.3,
            excitability_recovery_rate: 0.002,
        }
    }
}

impl FatigueParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.phi_min) || !(self.rate_max > 0.0) || !(self.rate_time_constant > 0.0) {
            return Err(invalid("fatigue parameters out of range"));
        }
        if !(0.0..1.0).contains(&self.excitability_threshold)
            || !(0.0..=1.0).contains(&self.excitability_floor)
            || !(self.excitability_depression_rate >= 0.0)
            || !(self.excitability_recovery_rate >= 0.0)
        {
            return Err(invalid("excitability parameters out of range"));
        }
        Ok(())
    }
}

/// One motor unit: axon plus muscle fibers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotorUnit {
    pub axon_id: usize,
    /// Newtons.
    pub twitch_peak: f64,
    /// Seconds.
    pub contraction_time: f64,
    /// 1/s; larger for larger units.
    pub fatigue_rate: f64,
    /// 1/s.
    pub recovery_rate: f64,
    /// Force-generating capacity in `[phi_min, 1]`.
    pub fatigue_factor: f64,
    /// Relative MUAP amplitude in `[excitability_floor, 1]`.
    pub excitability: f64,
}

/// Derives motor units from a pool (index-aligned with its axons).
pub fn build_units(pool: &AxonPool, cfg: &UnitConfig) -> Result<Vec<MotorUnit>> {
    if !(cfg.twitch_peak_min > 0.0) || !(cfg.twitch_peak_range >= 1.0) || !(cfg.contraction_time_max > 0.0) {
        return Err(invalid("unit twitch parameters out of range"));
    }
    if !(cfg.fatigue_rate_max >= 0.0) || !(cfg.recovery_rate >= 0.0) {
        return Err(invalid("unit fatigue rates must be non-negative"));
    }
    let (dmin, dmax) = (pool.distribution.min_um, pool.distribution.max_um);
    let peak_max = cfg.twitch_peak_min * cfg.twitch_peak_range;
    Ok(pool
        .axons
        .iter()
        .map(|a| {
            let p = cfg.twitch_peak_min * cfg.twitch_peak_range.powf((a.diameter - dmin) / (dmax - dmin));
            MotorUnit {
                axon_id: a.id,
                twitch_peak: p,
                contraction_time: cfg.contraction_time_max * (cfg.twitch_peak_min / p).powf(cfg.contraction_time_exponent),
                fatigue_rate: cfg.fatigue_rate_max * p / peak_max,
                recovery_rate: cfg.recovery_rate,
                fatigue_factor: 1.0,
                excitability: 1.0,
            }
        })
        .collect())
}

/// Force samples at a fixed rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceTrace {
    pub sample_rate: f64,
    /// Newtons; sample `k` is the force at `k / sample_rate`.
    pub samples: Vec<f64>,
}

impl ForceTrace {
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Mean force over `[start, end)` seconds.
    pub fn mean_between(&self, start: f64, end: f64) -> f64 {
        let lo = ((start * self.sample_rate) - 1e-9).ceil().max(0.0) as usize;
        let hi = (((end * self.sample_rate) - 1e-9).ceil() as usize).min(self.samples.len());
        let s = &self.samples[lo.min(hi)..hi];
        s.iter().sum::<f64>() / s.len().max(1) as f64
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time_s,force_N")?;
        for (k, v) in self.samples.iter().enumerate() {
            writeln!(w, "{},{}", k as f64 / self.sample_rate, v)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        match lines.next() {
            Some(Ok(h)) if h.trim() == "time_s,force_N" => {}
            _ => return Err(bad_data("force CSV header must be `time_s,force_N`")),
        }
        let mut t = Vec::new();
        let mut f = Vec::new();
        for (ln, line) in lines.enumerate() {
            let line = line.map_err(|e| bad_data(e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let parsed = line.split_once(',').and_then(|(a, b)| Some((a.parse::<f64>().ok()?, b.parse::<f64>().ok()?)));
            let (ti, fi) = parsed.ok_or_else(|| bad_data(format!("force CSV line {} malformed", ln + 2)))?;
            t.push(ti);
            f.push(fi);
        }
        if t.len() < 2 {
            return Err(bad_data("force CSV needs at least two samples"));
        }
        let sample_rate = ((t.len() - 1) as f64 / (t[t.len() - 1] - t[0])).round();
        Ok(Self { sample_rate, samples: f })
    }
}

/// Twitch of one unit `t` seconds after its spike.
pub fn twitch(unit: &MotorUnit, t: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    let x = t / unit.contraction_time;
    unit.fatigue_factor * unit.twitch_peak * x * (1.0 - x).exp()
}

/// `exp(-z)` for `z >= 0`, using a Taylor series where it is exact to
/// rounding (the fatigue exponents are tiny on millisecond steps).
#[inline]
fn exp_neg(z: f64) -> f64 {
    if z < 1e-3 {
        1.0 - z * (1.0 - z * (0.5 - z * (1.0 / 6.0 - z * (1.0 / 24.0))))
    } else {
        (-z).exp()
    }
}

/// Advances a state obeying `dx/dt = a - b x` exactly over `dt`.
#[inline]
fn relax(x: f64, a: f64, b: f64, dt: f64) -> f64 {
    if b <= 0.0 {
        return x + a * dt;
    }
    let target = a / b;
    target + (x - target) * exp_neg(b * dt)
}

/// Integrates fatigue and excitability over `dt` at a constant firing rate.
///
/// Fatigue: `dphi/dt = -k (phi - phi_min) r/r_max + rho (1 - phi) max(0, 1 - r/r_max)`.
/// Excitability depresses only while `r/r_max` exceeds the configured
/// threshold and recovers otherwise.
pub fn update_fatigue(unit: &MotorUnit, rate_hz: f64, dt: f64, p: &FatigueParams) -> MotorUnit {
    let x = rate_hz.max(0.0) / p.rate_max;
    let rec = (1.0 - x).max(0.0);
    let k = unit.fatigue_rate * x;
    let r = unit.recovery_rate * rec;
    let phi = relax(unit.fatigue_factor, k * p.phi_min + r, k + r, dt).clamp(p.phi_min, 1.0);
    let over = (x - p.excitability_threshold) / (1.0 - p.excitability_threshold);
    let psi = if over > 0.0 {
        let d = p.excitability_depression_rate * over;
        relax(unit.excitability, d * p.excitability_floor, d, dt)
    } else {
        let q = p.excitability_recovery_rate;
        relax(unit.excitability, q, q, dt)
    };
    MotorUnit { fatigue_factor: phi, excitability: psi.clamp(p.excitability_floor.min(1.0), 1.0), ..*unit }
}

/// Mean tetanic force with every unit at `rate_max` and full capacity.
///
/// A periodic train at rate `r` averages `P * T * e * r`, the kernel
/// integral times the rate.
pub fn mvc(units: &[MotorUnit], p: &FatigueParams) -> f64 {
    units.iter().map(|u| u.twitch_peak * u.contraction_time * std::f64::consts::E * p.rate_max).sum()
}

/// Step-by-step twitch superposition with concurrent fatigue updates.
///
/// Per unit it keeps `S0 = sum phi_j e^{-a_j/T}` and
/// `S1 = sum phi_j a_j e^{-a_j/T}` over spike ages `a_j`; force is
/// `sum P e / T * S1`, which equals the direct kernel sum at sample times.
pub struct MuscleState<'a> {
    pub units: Vec<MotorUnit>,
    params: &'a FatigueParams,
    dt: f64,
    q: Vec<f64>,
    s0: Vec<f64>,
    s1: Vec<f64>,
    rate: Vec<f64>,
    q_rate: f64,
    step: usize,
    fatigue: bool,
}

impl<'a> MuscleState<'a> {
    pub fn new(units: &[MotorUnit], params: &'a FatigueParams, dt: f64, fatigue: bool) -> Self {
        let n = units.len();
        Self {
            units: units.to_vec(),
            params,
            dt,
            q: units.iter().map(|u| (-dt / u.contraction_time).exp()).collect(),
            s0: vec![0.0; n],
            s1: vec![0.0; n],
            rate: vec![0.0; n],
            q_rate: (-dt / params.rate_time_constant).exp(),
            step: 0,
            fatigue,
        }
    }

    /// Time of the sample about to be produced.
    pub fn now(&self) -> f64 {
        self.step as f64 * self.dt
    }

    /// Moves accumulators to the current sample time.
    pub fn begin_step(&mut self) {
        if self.step > 0 {
            for i in 0..self.units.len() {
                self.s1[i] = self.q[i] * (self.s1[i] + self.dt * self.s0[i]);
                self.s0[i] *= self.q[i];
                self.rate[i] *= self.q_rate;
            }
        }
    }

    /// Registers a spike of `unit` at `time <= now()`; returns the unit's
    /// (fatigue factor, excitability) at that spike.
    pub fn add_spike(&mut self, unit: usize, time: f64) -> (f64, f64) {
        let u = &self.units[unit];
        let age = (self.now() - time).max(0.0);
        let e = (-age / u.contraction_time).exp();
        self.s0[unit] += u.fatigue_factor * e;
        self.s1[unit] += u.fatigue_factor * age * e;
        self.rate[unit] += 1.0 / self.params.rate_time_constant;
        (u.fatigue_factor, u.excitability)
    }

    /// Returns the force at the current sample and advances fatigue state.
    pub fn finish_step(&mut self) -> f64 {
        let mut force = 0.0;
        for (i, u) in self.units.iter_mut().enumerate() {
            force += u.twitch_peak * std::f64::consts::E / u.contraction_time * self.s1[i];
            if self.fatigue {
                let r = self.rate[i];
                if r > 0.0 || u.fatigue_factor < 1.0 || u.excitability < 1.0 {
                    *u = update_fatigue(u, r, self.dt, self.params);
                }
            }
        }
        self.step += 1;
        force.max(0.0)
    }
}

/// Force trace plus the per-spike unit state used downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceOutput {
    pub trace: ForceTrace,
    /// Unit state at the end of the trace.
    pub units: Vec<MotorUnit>,
    /// Fatigue factor of the unit at each of its spikes.
    pub fatigue_at_spike: Vec<Vec<f64>>,
    /// Excitability of the unit at each of its spikes.
    pub excitability_at_spike: Vec<Vec<f64>>,
}

/// Sums twitches of all spikes on a `dt` grid over `duration` seconds.
///
/// With `fatigue` set, each unit's capacity evolves with its firing rate and
/// a spike's twitch is scaled by the capacity at the moment it fires.
pub fn force_from_spikes(
    spikes: &SpikeTrainSet,
    units: &[MotorUnit],
    duration: f64,
    dt: f64,
    params: &FatigueParams,
    fatigue: bool,
) -> Result<ForceOutput> {
    if spikes.trains.len() != units.len() {
        return Err(bad_data(format!("{} spike trains for {} units", spikes.trains.len(), units.len())));
    }
    if !(dt > 0.0) || !(duration >= 0.0) {
        return Err(invalid("force grid needs positive dt and non-negative duration"));
    }
    let n = (duration / dt).round() as usize;
    let merged = spikes.merged();
    let mut state = MuscleState::new(units, params, dt, fatigue);
    let mut samples = Vec::with_capacity(n);
    let mut phi_at: Vec<Vec<f64>> = spikes.trains.iter().map(|t| Vec::with_capacity(t.len())).collect();
    let mut psi_at = phi_at.clone();
    let mut j = 0;
    for k in 0..n {
        state.begin_step();
        let now = k as f64 * dt;
        while j < merged.len() && merged[j].0 <= now + 1e-12 {
            let (t, i) = merged[j];
            let (phi, psi) = state.add_spike(i, t);
            phi_at[i].push(phi);
            psi_at[i].push(psi);
            j += 1;
        }
        samples.push(state.finish_step());
    }
    // Spikes after the last sample still get their state recorded.
    while j < merged.len() {
        let i = merged[j].1;
        phi_at[i].push(state.units[i].fatigue_factor);
        psi_at[i].push(state.units[i].excitability);
        j += 1;
    }
    Ok(ForceOutput {
        trace: ForceTrace { sample_rate: 1.0 / dt, samples },
        units: state.units,
        fatigue_at_spike: phi_at,
        excitability_at_spike: psi_at,
    })
}

/// Outcome of an amplitude search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub amplitude: f64,
    /// Achieved force as a fraction of MVC.
    pub achieved: f64,
    pub iterations: usize,
}

/// Settings for [`calibrate_amplitude`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub amplitude_max: f64,
    /// Bisection stops once within this fraction of MVC.
    pub tolerance: f64,
    /// Largest accepted error, as a fraction of MVC.
    pub acceptance: f64,
    pub max_iterations: usize,
    /// Force is averaged over this window of the calibration run.
    pub window: (f64, f64),
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self { amplitude_max: 20.0, tolerance: 0.005, acceptance: 0.02, max_iterations: 40, window: (5.0, 15.0) }
    }
}

/// Bisection on amplitude for a force response that grows with amplitude.
///
/// `response(A)` returns the mean force over the calibration window as a
/// fraction of MVC.
pub fn calibrate_amplitude<F>(target: f64, cfg: &CalibrationConfig, mut response: F) -> Result<Calibration>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(target > 0.0 && target < 1.0) {
        return Err(invalid("calibration target must lie in (0, 1)"));
    }
    let (mut lo, mut hi) = (0.0, cfg.amplitude_max);
    let mut best = Calibration { amplitude: f64::NAN, achieved: 0.0, iterations: 0 };
    for it in 1..=cfg.max_iterations {
        let a = 0.5 * (lo + hi);
        let f = response(a)?;
        if !best.amplitude.is_finite() || (f - target).abs() < (best.achieved - target).abs() {
            best = Calibration { amplitude: a, achieved: f, iterations: it };
        }
        best.iterations = it;
        if (f - target).abs() <= cfg.tolerance {
            break;
        }
        if f < target {
            lo = a;
        } else {
            hi = a;
        }
    }
    if (best.achieved - target).abs() > cfg.acceptance {
        return Err(Error::Numeric(format!(
            "target {:.3} MVC unreachable below {} mA; best {:.4} MVC at {:.4} mA",
            target, cfg.amplitude_max, best.achieved, best.amplitude
        )));
    }
    Ok(best)
}

/// Common-drive controller for the voluntary contraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoluntaryConfig {
    /// Firing rate at recruitment, Hz.
    pub rate_min: f64,
    /// Ratio between the last and first recruitment thresholds.
    pub recruitment_range: f64,
    /// Drive at which the last unit is recruited.
    pub full_recruitment_drive: f64,
    /// Integral gain in drive per second per unit of force error (MVC).
    pub integral_gain: f64,
    /// Low-pass time constant of the force feedback.
    pub feedback_time_constant: f64,
    /// Coefficient of variation of inter-spike intervals.
    pub jitter_cv: f64,
}

impl Default for VoluntaryConfig {
    fn default() -> Self {
        Self {
            rate_min: 8.0,
            recruitment_range: 30.0,
            full_recruitment_drive: 0.6,
            integral_gain: 2.0,
            feedback_time_constant: 0.2,
            jitter_cv: 0.15,
        }
    }
}

/// Voluntary contraction outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct VoluntaryOutput {
    pub spikes: SpikeTrainSet,
    pub force: ForceOutput,
    /// Common drive per force sample.
    pub drive: Vec<f64>,
    pub initial_drive: f64,
}

/// Recruitment thresholds in drive units, ordered by the size principle
/// (smallest twitch first).
pub fn recruitment_thresholds(units: &[MotorUnit], cfg: &VoluntaryConfig) -> Vec<f64> {
    let n = units.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| units[a].twitch_peak.total_cmp(&units[b].twitch_peak).then(a.cmp(&b)));
    let mut thr = vec![0.0; n];
    let rr = cfg.recruitment_range;
    for (rank, &i) in order.iter().enumerate() {
        let x = if n > 1 { rank as f64 / (n - 1) as f64 } else { 0.0 };
        thr[i] = ((rr.ln() * x).exp() - 1.0) / (rr - 1.0) * cfg.full_recruitment_drive;
    }
    thr
}

fn firing_rate(drive: f64, threshold: f64, cfg: &VoluntaryConfig, p: &FatigueParams) -> Option<f64> {
    if drive < threshold {
        return None;
    }
    let span = (1.0 - threshold).max(1e-12);
    Some((cfg.rate_min + (p.rate_max - cfg.rate_min) * (drive - threshold) / span).min(p.rate_max))
}

/// Unfatigued mean force (fraction of MVC) produced at a steady drive.
pub fn static_force(drive: f64, units: &[MotorUnit], thr: &[f64], cfg: &VoluntaryConfig, p: &FatigueParams) -> f64 {
    let total = mvc(units, p);
    units
        .iter()
        .zip(thr)
        .filter_map(|(u, &t)| firing_rate(drive, t, cfg, p).map(|r| u.twitch_peak * u.contraction_time * std::f64::consts::E * r))
        .sum::<f64>()
        / total
}

/// Size-principle recruitment under a common drive tracking `target`.
pub fn voluntary_trial(
    units: &[MotorUnit],
    target: f64,
    duration: f64,
    dt: f64,
    cfg: &VoluntaryConfig,
    p: &FatigueParams,
    seed: u64,
) -> Result<VoluntaryOutput> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(invalid("voluntary target must lie in (0, 1]"));
    }
    let n = units.len();
    let thr = recruitment_thresholds(units, cfg);
    // Feed-forward drive: bisection on the static force curve.
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if static_force(1.0, units, &thr, cfg, p) <= target {
        lo = 1.0;
    } else {
        for _ in 0..60 {
            let m = 0.5 * (lo + hi);
            if static_force(m, units, &thr, cfg, p) < target {
                lo = m;
            } else {
                hi = m;
            }
        }
    }
    let initial_drive = if lo >= 1.0 { 1.0 } else { 0.5 * (lo + hi) };
    let total = mvc(units, p);
    let mut r = rng::stream(seed, "voluntary-jitter", 0);
    let mut phase: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
    let clip = 0.5;
    let jitter_draw = |r: &mut rand_chacha::ChaCha8Rng| (cfg.jitter_cv * r.sample::<f64, _>(StandardNormal)).clamp(-clip, clip);
    let mut jitter: Vec<f64> = (0..n).map(|_| jitter_draw(&mut r)).collect();
    let steps = (duration / dt).round() as usize;
    let mut state = MuscleState::new(units, p, dt, true);
    let mut trains = vec![Vec::new(); n];
    let mut phi_at = vec![Vec::new(); n];
    let mut psi_at = vec![Vec::new(); n];
    let mut samples = Vec::with_capacity(steps);
    let mut drives = Vec::with_capacity(steps);
    let mut e = initial_drive;
    let mut filtered = target * total;
    let alpha = dt / cfg.feedback_time_constant;
    for _ in 0..steps {
        state.begin_step();
        let now = state.now();
        for i in 0..n {
            if let Some(rate) = firing_rate(e, thr[i], cfg, p) {
                phase[i] += rate * dt;
                if phase[i] >= 1.0 + jitter[i] {
                    phase[i] = 0.0;
                    jitter[i] = jitter_draw(&mut r);
                    let (phi, psi) = state.add_spike(i, now);
                    trains[i].push(now);
                    phi_at[i].push(phi);
                    psi_at[i].push(psi);
                }
            }
        }
        let f = state.finish_step();
        samples.push(f);
        drives.push(e);
        filtered += (f - filtered) * alpha;
        e = (e + cfg.integral_gain * (target - filtered / total) * dt).clamp(0.0, 1.0);
    }
    Ok(VoluntaryOutput {
        spikes: SpikeTrainSet { trains },
        force: ForceOutput {
            trace: ForceTrace { sample_rate: 1.0 / dt, samples },
            units: state.units,
            fatigue_at_spike: phi_at,
            excitability_at_spike: psi_at,
        },
        drive: drives,
        initial_drive,
    })
}
