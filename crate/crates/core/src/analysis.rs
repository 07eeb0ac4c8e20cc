//! Force and EMG metrics: smoothed force, period means, residual force,
//! segment RMS, normalized RMS and interpolated spatial RMS maps.

use serde::{Deserialize, Serialize};

use crate::emg::EmgGridRecord;
use crate::error::{bad_data, invalid, Result};
use crate::spline;

/// Ordered, non-overlapping analysis periods in seconds, starting at 5–15 s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PeriodSet(pub Vec<(f64, f64)>);

/// Reference period that every normalization divides by.
pub const INITIAL_PERIOD: (f64, f64) = (5.0, 15.0);

impl PeriodSet {
    /// Declared defaults for a target level (fraction of MVC).
    pub fn for_level(level: f64) -> Self {
        let b: &[f64] = if (level - 0.40).abs() < 1e-9 {
            &[5.0, 15.0, 50.0, 80.0, 120.0, 165.0]
        } else if (level - 0.25).abs() < 1e-9 {
            &[5.0, 15.0, 60.0, 105.0, 150.0, 195.0, 240.0]
        } else if (level - 0.10).abs() < 1e-9 {
            &[5.0, 15.0, 72.0, 129.0, 186.0, 243.0, 300.0]
        } else {
            &[5.0, 15.0]
        };
        Self(b.windows(2).map(|w| (w[0], w[1])).collect())
    }

    /// Initial period followed by `n` equal periods ending at `end`.
    pub fn evenly_spaced(end: f64, n: usize) -> Self {
        let mut v = vec![INITIAL_PERIOD];
        let step = (end - INITIAL_PERIOD.1) / n as f64;
        for i in 0..n {
            v.push((INITIAL_PERIOD.1 + i as f64 * step, INITIAL_PERIOD.1 + (i + 1) as f64 * step));
        }
        Self(v)
    }

    pub fn validate(&self, duration: f64) -> Result<()> {
        let p = &self.0;
        if p.first() != Some(&INITIAL_PERIOD) {
            return Err(invalid("first analysis period must be 5-15 s"));
        }
        for (i, &(a, b)) in p.iter().enumerate() {
            if !(a < b) || b > duration + 1e-9 {
                return Err(invalid(format!("period {i} ({a}-{b} s) is empty or beyond {duration} s")));
            }
            if i > 0 && a < p[i - 1].1 {
                return Err(invalid(format!("period {i} overlaps its predecessor")));
            }
        }
        Ok(())
    }

    pub fn last(&self) -> (f64, f64) {
        *self.0.last().expect("period set is never empty")
    }
}

/// Window means of a uniformly sampled series, with window centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Smoothed {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// Means over `window`-second windows every `step` seconds.
pub fn smooth_force(samples: &[f64], sample_rate: f64, window: f64, step: f64) -> Result<Smoothed> {
    let w = (window * sample_rate).round() as usize;
    let s = (step * sample_rate).round() as usize;
    if w == 0 || s == 0 {
        return Err(invalid("window and step must span at least one sample"));
    }
    if samples.len() < w {
        return Err(bad_data("trace shorter than one smoothing window"));
    }
    let count = (samples.len() - w) / s + 1;
    let mut times = Vec::with_capacity(count);
    let mut values = Vec::with_capacity(count);
    for k in 0..count {
        let seg = &samples[k * s..k * s + w];
        values.push(seg.iter().sum::<f64>() / w as f64);
        times.push((k * s) as f64 / sample_rate + window / 2.0);
    }
    Ok(Smoothed { times, values })
}

/// Mean of the values whose time stamp lies in `[start, end)`.
fn mean_in(times: &[f64], values: &[f64], (start, end): (f64, f64)) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (&t, &v) in times.iter().zip(values) {
        if t >= start && t < end {
            sum += v;
            n += 1;
        }
    }
    if n == 0 {
        return Err(bad_data(format!("no samples in period {start}-{end} s")));
    }
    Ok(sum / n as f64)
}

/// Arithmetic mean per period.
pub fn period_average(series: &Smoothed, periods: &PeriodSet) -> Result<Vec<f64>> {
    periods.0.iter().map(|&p| mean_in(&series.times, &series.values, p)).collect()
}

/// Mean force over `period` as a percentage of MVC.
pub fn residual_force(series: &Smoothed, period: (f64, f64), mvc: f64) -> Result<f64> {
    if !(mvc > 0.0) {
        return Err(invalid("MVC must be positive"));
    }
    Ok(100.0 * mean_in(&series.times, &series.values, period)? / mvc)
}

/// Mean of per-second RMS values over consecutive whole seconds of
/// `[start, end)`; a trailing partial second is dropped.
pub fn segment_rms(x: &[f64], sample_rate: f64, (start, end): (f64, f64)) -> Result<f64> {
    let seconds = ((end - start) + 1e-9).floor() as usize;
    if seconds == 0 {
        return Err(invalid("period shorter than one second"));
    }
    let seg = sample_rate.round() as usize;
    let first = (start * sample_rate).round() as usize;
    if first + seconds * seg > x.len() {
        return Err(bad_data("period extends beyond the signal"));
    }
    let total: f64 = (0..seconds)
        .map(|k| {
            let s = &x[first + k * seg..first + (k + 1) * seg];
            (s.iter().map(|v| v * v).sum::<f64>() / seg as f64).sqrt()
        })
        .sum();
    Ok(total / seconds as f64)
}

/// Per-second mean-square values of each channel, the compact form in which
/// trial EMG is retained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsTable {
    pub rows: usize,
    pub cols: usize,
    /// `mean_square[channel][second]`.
    pub mean_square: Vec<Vec<f64>>,
}

impl RmsTable {
    pub fn from_channels<'a>(rows: usize, cols: usize, channels: impl IntoIterator<Item = &'a [f64]>, sample_rate: f64) -> Self {
        let seg = sample_rate.round() as usize;
        let mean_square = channels
            .into_iter()
            .map(|c| c.chunks_exact(seg).map(|s| s.iter().map(|v| v * v).sum::<f64>() / seg as f64).collect())
            .collect();
        Self { rows, cols, mean_square }
    }

    fn seconds(&self, (start, end): (f64, f64)) -> Result<std::ops::Range<usize>> {
        let lo = start.round() as usize;
        let hi = lo + ((end - start) + 1e-9).floor() as usize;
        if hi == lo {
            return Err(invalid("period shorter than one second"));
        }
        if (start - start.round()).abs() > 1e-9 {
            return Err(invalid("table periods must start on whole seconds"));
        }
        if self.mean_square.iter().any(|c| c.len() < hi) {
            return Err(bad_data("period extends beyond the table"));
        }
        Ok(lo..hi)
    }

    /// [`segment_rms`] of one channel from the table.
    pub fn segment_rms(&self, channel: usize, period: (f64, f64)) -> Result<f64> {
        let r = self.seconds(period)?;
        let n = r.len() as f64;
        Ok(self.mean_square[channel][r].iter().map(|v| v.sqrt()).sum::<f64>() / n)
    }

    /// Channel-mean segment RMS for each period.
    pub fn grid_segment_rms(&self, periods: &PeriodSet) -> Result<Vec<f64>> {
        periods
            .0
            .iter()
            .map(|&p| {
                let v: Result<Vec<f64>> = (0..self.mean_square.len()).map(|c| self.segment_rms(c, p)).collect();
                Ok(crate::dsp::mean(&v?))
            })
            .collect()
    }

    /// Spatial map of whole-window RMS.
    pub fn spatial_map(&self, window: (f64, f64)) -> Result<SpatialRmsMap> {
        let r = self.seconds(window)?;
        let n = r.len() as f64;
        let base: Vec<f64> = self.mean_square.iter().map(|c| (c[r.clone()].iter().sum::<f64>() / n).sqrt()).collect();
        SpatialRmsMap::from_base(self.rows, self.cols, base)
    }
}

/// Each value divided by the first (the initial-period value).
pub fn normalized_rms(values: &[f64]) -> Result<Vec<f64>> {
    let first = *values.first().ok_or_else(|| invalid("no RMS values"))?;
    if !(first > 0.0) {
        return Err(bad_data("initial-period RMS is zero"));
    }
    Ok(values.iter().map(|v| v / first).collect())
}

/// Upsampling factor of spatial maps along each axis.
pub const MAP_FACTOR: usize = 10;

/// Per-electrode RMS and its spline-upsampled version (row-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialRmsMap {
    pub rows: usize,
    pub cols: usize,
    pub base: Vec<f64>,
    pub interpolated: Vec<f64>,
}

impl SpatialRmsMap {
    pub fn from_base(rows: usize, cols: usize, base: Vec<f64>) -> Result<Self> {
        let interpolated = spline::upsample_grid(&base, rows, cols, MAP_FACTOR)?;
        Ok(Self { rows, cols, base, interpolated })
    }

    pub fn interpolated_dims(&self) -> (usize, usize) {
        (self.rows * MAP_FACTOR, self.cols * MAP_FACTOR)
    }

    /// Interpolated values as CSV lines, one grid row per line.
    pub fn interpolated_csv(&self) -> String {
        let (_, c) = self.interpolated_dims();
        let mut s = String::new();
        for row in self.interpolated.chunks(c) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }
}

/// Channel RMS over `window` on the 8x16 grid, upsampled tenfold.
pub fn spatial_rms_map(emg: &EmgGridRecord, window: (f64, f64)) -> Result<SpatialRmsMap> {
    emg.validate()?;
    if window.1 - window.0 < 1.0 - 1e-9 {
        return Err(invalid("spatial map window shorter than 1 s"));
    }
    let lo = (window.0 * emg.sample_rate).round() as usize;
    let hi = (window.1 * emg.sample_rate).round() as usize;
    if hi > emg.len() || lo >= hi {
        return Err(invalid("spatial map window outside the record"));
    }
    let base = emg.channels.iter().map(|c| crate::dsp::rms(&c[lo..hi])).collect();
    SpatialRmsMap::from_base(emg.layout.rows, emg.layout.cols, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_period_sets_are_valid() {
        for (level, dur) in [(0.10, 300.0), (0.25, 240.0), (0.40, 180.0)] {
            let p = PeriodSet::for_level(level);
            p.validate(dur).unwrap();
            assert!(p.0.len() >= 5);
        }
        assert!(PeriodSet(vec![(0.0, 15.0)]).validate(100.0).is_err());
    }

    #[test]
    fn smoothing_count_matches_formula() {
        let x = vec![1.0; 10_500];
        let s = smooth_force(&x, 1000.0, 1.0, 0.5).unwrap();
        assert_eq!(s.values.len(), (10_500 - 1000) / 500 + 1);
        assert!(s.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn table_matches_direct_segment_rms() {
        let x: Vec<f64> = (0..2048 * 20).map(|i| ((i as f64) * 0.01).sin() * (1.0 + (i / 2048) as f64)).collect();
        let t = RmsTable::from_channels(1, 1, [x.as_slice()], 2048.0);
        let a = t.segment_rms(0, (5.0, 15.0)).unwrap();
        let b = segment_rms(&x, 2048.0, (5.0, 15.0)).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}
