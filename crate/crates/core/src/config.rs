//! Versioned experiment configuration.

use serde::{Deserialize, Serialize};

use crate::analysis::PeriodSet;
use crate::axon::{AxonConfig, DiameterDistribution};
use crate::emg::{GridLayout, HfArtifactConfig, LfArtifactConfig, NoiseConfig, TemplateConfig};
use crate::error::{invalid, Error, Result};
use crate::muscle::{CalibrationConfig, FatigueParams, UnitConfig, VoluntaryConfig};
use crate::removal::{HfRemovalParams, LfRemovalParams};
use crate::stim::{HfParams, LfParams, StimParams};

pub const SCHEMA_VERSION: u32 = 1;

/// Motor pool of one simulated subject.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolConfig {
    pub units: usize,
    pub diameter: DiameterDistribution,
    pub axon: AxonConfig,
    pub motor_units: UnitConfig,
    pub fatigue: FatigueParams,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self {
            units: 120,
            diameter: DiameterDistribution::default(),
            axon: AxonConfig::default(),
            motor_units: UnitConfig::default(),
            fatigue: FatigueParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub lf: LfParams,
    pub hf: HfParams,
    /// Rate at which pulse trains are represented.
    pub stim_sample_rate: f64,
    pub calibration: CalibrationConfig,
    pub voluntary: VoluntaryConfig,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            lf: LfParams::default(),
            hf: HfParams::default(),
            stim_sample_rate: 100_000.0,
            calibration: CalibrationConfig::default(),
            voluntary: VoluntaryConfig::default(),
        }
    }
}

/// A target force level with its trial duration and analysis periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelConfig {
    /// Fraction of MVC.
    pub level: f64,
    pub duration: f64,
    pub periods: PeriodSet,
}

impl LevelConfig {
    pub fn new(level: f64, duration: f64) -> Self {
        Self { level, duration, periods: PeriodSet::for_level(level) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmgConfig {
    pub sample_rate: f64,
    pub layout: GridLayout,
    pub templates: TemplateConfig,
    pub noise: NoiseConfig,
    /// Start and length (seconds) of the stored full-resolution excerpt.
    pub excerpt_start: f64,
    pub excerpt_length: f64,
    /// Length of the rest recording used as replacement material.
    pub rest_length: f64,
}

impl Default for EmgConfig {
    fn default() -> Self {
        Self {
            sample_rate: 2048.0,
            layout: GridLayout::default(),
            templates: TemplateConfig::default(),
            noise: NoiseConfig::default(),
            excerpt_start: 5.0,
            excerpt_length: 4.0,
            rest_length: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ArtifactConfig {
    pub lf: LfArtifactConfig,
    pub hf: HfArtifactConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RemovalConfig {
    pub lf: LfRemovalParams,
    pub hf: HfRemovalParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub force_sample_rate: f64,
    pub smoothing_window: f64,
    pub smoothing_step: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self { force_sample_rate: 1000.0, smoothing_window: 1.0, smoothing_step: 0.5 }
    }
}

/// Everything a run depends on besides the binary itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub subjects: usize,
    pub pool: PoolConfig,
    pub protocols: ProtocolConfig,
    pub levels: Vec<LevelConfig>,
    pub emg: EmgConfig,
    pub artifacts: ArtifactConfig,
    pub removal: RemovalConfig,
    pub analysis: AnalysisConfig,
    pub output_dir: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 1,
            subjects: 1,
            pool: PoolConfig::default(),
            protocols: ProtocolConfig::default(),
            levels: vec![LevelConfig::new(0.10, 300.0), LevelConfig::new(0.25, 240.0), LevelConfig::new(0.40, 180.0)],
            emg: EmgConfig::default(),
            artifacts: ArtifactConfig::default(),
            removal: RemovalConfig::default(),
            analysis: AnalysisConfig::default(),
            output_dir: "fesim-out".into(),
        }
    }
}

fn field<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::InvalidParameter(m) => Error::InvalidParameter(format!("{name}: {m}")),
        other => other,
    })
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| invalid(format!("config is not valid JSON: {e}")))?;
        let version = value.get("schema_version").and_then(|v| v.as_u64());
        if version != Some(SCHEMA_VERSION as u64) {
            return Err(invalid(format!("schema_version: expected {SCHEMA_VERSION}, found {version:?}")));
        }
        let cfg: Self = serde_json::from_value(value).map_err(|e| invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn stim_params(&self, hf: bool) -> StimParams {
        if hf {
            StimParams::Hf(self.protocols.hf)
        } else {
            StimParams::Lf(self.protocols.lf)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(format!("schema_version: expected {SCHEMA_VERSION}")));
        }
        if self.subjects == 0 {
            return Err(invalid("subjects: at least one subject is required"));
        }
        let p = &self.pool;
        if p.units == 0 {
            return Err(invalid("pool.units: must be at least 1"));
        }
        if !(p.diameter.min_um > 0.0 && p.diameter.min_um < p.diameter.max_um) || !(p.diameter.exponent >= 0.0) {
            return Err(invalid("pool.diameter: need 0 < min_um < max_um and exponent >= 0"));
        }
        field("pool.axon", p.axon.validate())?;
        field("pool.fatigue", p.fatigue.validate())?;
        let u = &p.motor_units;
        if !(u.twitch_peak_min > 0.0 && u.twitch_peak_range >= 1.0 && u.contraction_time_max > 0.0) {
            return Err(invalid("pool.motor_units: twitch parameters out of range"));
        }
        let pr = &self.protocols;
        field("protocols.lf", pr.lf.validate())?;
        field("protocols.hf", pr.hf.validate())?;
        if !(pr.stim_sample_rate > 0.0) {
            return Err(invalid("protocols.stim_sample_rate: must be positive"));
        }
        field("protocols", crate::stim::PulseSchedule::new(&StimParams::Lf(pr.lf), 1.0, pr.stim_sample_rate).map(|_| ()))?;
        field("protocols", crate::stim::PulseSchedule::new(&StimParams::Hf(pr.hf), 1.0, pr.stim_sample_rate).map(|_| ()))?;
        let c = &pr.calibration;
        if !(c.amplitude_max > 0.0 && c.tolerance > 0.0 && c.acceptance >= c.tolerance && c.max_iterations > 0) {
            return Err(invalid("protocols.calibration: bounds out of range"));
        }
        if !(c.window.0 >= 0.0 && c.window.0 < c.window.1) {
            return Err(invalid("protocols.calibration.window: must be an increasing pair"));
        }
        let v = &pr.voluntary;
        if !(v.rate_min > 0.0 && v.rate_min <= p.fatigue.rate_max && v.recruitment_range > 1.0) {
            return Err(invalid("protocols.voluntary: rate_min must lie in (0, rate_max] and recruitment_range > 1"));
        }
        if !(v.full_recruitment_drive > 0.0 && v.full_recruitment_drive <= 1.0 && v.integral_gain >= 0.0 && v.feedback_time_constant > 0.0 && v.jitter_cv >= 0.0) {
            return Err(invalid("protocols.voluntary: controller parameters out of range"));
        }
        if self.levels.is_empty() {
            return Err(invalid("levels: at least one level is required"));
        }
        for (i, l) in self.levels.iter().enumerate() {
            if !(l.level > 0.0 && l.level < 1.0) {
                return Err(invalid(format!("levels[{i}].level: must lie in (0, 1)")));
            }
            if !(l.duration >= c.window.1) {
                return Err(invalid(format!("levels[{i}].duration: shorter than the calibration window")));
            }
            field(&format!("levels[{i}].periods"), l.periods.validate(l.duration))?;
        }
        let e = &self.emg;
        if !(e.sample_rate > 0.0) || e.layout.rows == 0 || e.layout.cols == 0 {
            return Err(invalid("emg: sample rate and layout must be positive"));
        }
        if !(e.noise.rms_mv >= 0.0 && e.noise.band_low > 0.0 && e.noise.band_low < e.noise.band_high && e.noise.band_high < e.sample_rate / 2.0) {
            return Err(invalid("emg.noise: need 0 < band_low < band_high < Nyquist and rms >= 0"));
        }
        let t = &e.templates;
        if !(t.amplitude_min_mv > 0.0 && t.duration_min > 0.0 && t.duration_min <= t.duration_max && t.decay_min_mm > 0.0 && t.decay_min_mm <= t.decay_max_mm) {
            return Err(invalid("emg.templates: ranges out of order"));
        }
        if !(e.excerpt_start >= 0.0 && e.excerpt_length >= 1.0) || !(e.rest_length > 0.0) {
            return Err(invalid("emg: excerpt must be at least 1 s and rest_length positive"));
        }
        for (i, l) in self.levels.iter().enumerate() {
            if e.excerpt_start + e.excerpt_length > l.duration {
                return Err(invalid(format!("emg.excerpt: extends beyond levels[{i}].duration")));
            }
        }
        if !(self.artifacts.lf.magnitude_ratio >= 10.0 && self.artifacts.hf.magnitude_ratio >= 10.0) {
            return Err(invalid("artifacts: magnitude_ratio must be at least 10"));
        }
        field("removal.lf", self.removal.lf.validate())?;
        field("removal.hf", self.removal.hf.validate())?;
        let a = &self.analysis;
        if !(a.force_sample_rate > 0.0 && a.smoothing_window > 0.0 && a.smoothing_step > 0.0) {
            return Err(invalid("analysis: rates and windows must be positive"));
        }
        if self.output_dir.is_empty() {
            return Err(invalid("output_dir: must not be empty"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_validate() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn field_level_messages() {
        let mut c = ExperimentConfig::default();
        c.pool.axon.anodic_efficacy = 1.5;
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("pool.axon"), "{msg}");
        let bad = ExperimentConfig::default().to_json().replace("\"schema_version\": 1", "\"schema_version\": 9");
        assert!(ExperimentConfig::from_json(&bad).unwrap_err().to_string().contains("schema_version"));
    }
}
