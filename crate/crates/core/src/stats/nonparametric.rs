use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::{midranks, tie_sizes, RepeatedMeasures, TestResult};
use crate::error::{invalid, Error, Result};

/// Largest number of nonzero differences for which the Wilcoxon p-value is
/// computed by enumerating every sign assignment.
pub const EXACT_WILCOXON_MAX_N: usize = 12;

/// Friedman test over all cells of the design.
pub fn friedman(rm: &RepeatedMeasures) -> Result<TestResult> {
    rm.validate()?;
    let k = rm.cells();
    if k < 3 {
        return Err(invalid("Friedman's test needs at least three conditions"));
    }
    let n = rm.subjects() as f64;
    let kf = k as f64;
    let mut sums = vec![0.0; k];
    let mut ties = 0.0;
    for row in &rm.data {
        for (s, r) in sums.iter_mut().zip(midranks(row)) {
            *s += r;
        }
        ties += tie_sizes(row).iter().map(|&t| (t * t * t - t) as f64).sum::<f64>();
    }
    let denom = 1.0 - ties / (n * (kf * kf * kf - kf));
    let df = kf - 1.0;
    if denom <= 1e-12 {
        return Ok(TestResult::new("friedman", 0.0, vec![df], 1.0).note("all observations tied within subjects"));
    }
    let raw = 12.0 / (n * kf * (kf + 1.0)) * sums.iter().map(|r| r * r).sum::<f64>() - 3.0 * n * (kf + 1.0);
    let chi = (raw / denom).max(0.0);
    let dist = ChiSquared::new(df).map_err(|e| Error::Numeric(e.to_string()))?;
    Ok(TestResult::new("friedman", chi, vec![df], dist.sf(chi)))
}

/// Two-sided Wilcoxon signed-rank test on `x - y`. Zero differences are
/// dropped and tied magnitudes get midranks. The statistic is
/// `min(W+, W-)`.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(invalid("paired samples differ in length"));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|v| *v != 0.0).collect();
    if d.is_empty() {
        return Err(invalid("all paired differences are zero"));
    }
    let n = d.len();
    if n < 5 {
        return Err(invalid(format!("Wilcoxon needs at least 5 nonzero differences, got {n}")));
    }
    let mags: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = midranks(&mags);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let stat = w_plus.min(total - w_plus);
    if n <= EXACT_WILCOXON_MAX_N {
        // Doubled midranks are integers, so compare exactly in that scale.
        let r2: Vec<i64> = ranks.iter().map(|r| (2.0 * r).round() as i64).collect();
        let t2: i64 = r2.iter().sum();
        let obs2 = (2.0 * w_plus).round() as i64;
        let dev = (2 * obs2 - t2).abs();
        let mut extreme = 0u64;
        for mask in 0u32..(1u32 << n) {
            let s: i64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| r2[i]).sum();
            if (2 * s - t2).abs() >= dev {
                extreme += 1;
            }
        }
        let p = extreme as f64 / (1u64 << n) as f64;
        return Ok(TestResult::new("wilcoxon_exact", stat, vec![n as f64], p));
    }
    let p = wilcoxon_normal_approx(x, y)?;
    Ok(TestResult::new("wilcoxon_normal", stat, vec![n as f64], p))
}

/// Normal approximation regardless of `n`, for cross-checking the exact
/// enumeration.
pub fn wilcoxon_normal_approx(x: &[f64], y: &[f64]) -> Result<f64> {
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|v| *v != 0.0).collect();
    if d.is_empty() {
        return Err(invalid("all paired differences are zero"));
    }
    let mags: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = midranks(&mags);
    let nf = d.len() as f64;
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let ties: f64 = tie_sizes(&mags).iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - ties / 48.0;
    let z = ((w_plus - nf * (nf + 1.0) / 4.0).abs() - 0.5).max(0.0) / var.sqrt();
    Ok(2.0 * Normal::new(0.0, 1.0).expect("unit normal").sf(z))
}
