//! Repeated-measures statistics and the parametric/nonparametric decision
//! procedure with Holm step-down correction.

mod anova;
mod nonparametric;
mod normality;
mod plan;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{invalid, Result};

pub use anova::{effects, mauchly, rm_anova, Effect};
pub use nonparametric::{friedman, wilcoxon_normal_approx, wilcoxon_signed_rank, EXACT_WILCOXON_MAX_N};
pub use normality::shapiro_wilk;
pub use plan::{select_tests, AnalysisPlan, Branch, ReportEntry};

/// Significance level used for every decision.
pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test_name: String,
    #[serde(with = "crate::nonfinite")]
    pub statistic: f64,
    pub df: Vec<f64>,
    pub p: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl TestResult {
    fn new(name: impl Into<String>, statistic: f64, df: Vec<f64>, p: f64) -> Self {
        Self { test_name: name.into(), statistic, df, p: p.clamp(0.0, 1.0), notes: Vec::new() }
    }

    fn note(mut self, n: impl Into<String>) -> Self {
        self.notes.push(n.into());
        self
    }
}

/// A factor of a repeated-measures design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub name: String,
    pub levels: Vec<String>,
}

impl Factor {
    pub fn new(name: &str, levels: &[&str]) -> Self {
        Self { name: name.into(), levels: levels.iter().map(|s| s.to_string()).collect() }
    }
}

/// Complete subjects x cells data. With two factors the cell index is
/// `i_first * levels_second + i_second`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatedMeasures {
    pub factors: Vec<Factor>,
    /// `data[subject][cell]`.
    pub data: Vec<Vec<f64>>,
}

impl RepeatedMeasures {
    pub fn new(factors: Vec<Factor>, data: Vec<Vec<f64>>) -> Result<Self> {
        let rm = Self { factors, data };
        rm.validate()?;
        Ok(rm)
    }

    pub fn one_way(name: &str, levels: &[&str], data: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(vec![Factor::new(name, levels)], data)
    }

    pub fn cells(&self) -> usize {
        self.factors.iter().map(|f| f.levels.len()).product()
    }

    pub fn subjects(&self) -> usize {
        self.data.len()
    }

    pub fn cell_label(&self, cell: usize) -> String {
        match self.factors.as_slice() {
            [f] => f.levels[cell].clone(),
            [a, b] => format!("{}/{}", a.levels[cell / b.levels.len()], b.levels[cell % b.levels.len()]),
            _ => cell.to_string(),
        }
    }

    pub fn column(&self, cell: usize) -> Vec<f64> {
        self.data.iter().map(|r| r[cell]).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.factors.is_empty() || self.factors.len() > 2 {
            return Err(invalid("designs have one or two factors"));
        }
        if self.factors.iter().any(|f| f.levels.len() < 2) {
            return Err(invalid("every factor needs at least two levels"));
        }
        if self.data.len() < 2 {
            return Err(invalid(format!("{} subject(s); at least 2 are required", self.data.len())));
        }
        let k = self.cells();
        if self.data.iter().any(|r| r.len() != k) {
            return Err(invalid(format!("every subject needs exactly {k} cells")));
        }
        if self.data.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("data contain non-finite values"));
        }
        Ok(())
    }
}

/// Two-sided paired t test on `x - y`.
pub fn paired_t(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(invalid("paired t needs two equally long samples of at least 2"));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let df = n - 1.0;
    if var == 0.0 {
        if mean == 0.0 {
            return Err(invalid("paired differences are all zero"));
        }
        return Ok(TestResult::new("paired_t", mean.signum() * f64::INFINITY, vec![df], 0.0).note("zero variance of differences"));
    }
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| crate::Error::Numeric(e.to_string()))?;
    Ok(TestResult::new("paired_t", t, vec![df], 2.0 * dist.sf(t.abs())))
}

/// Holm step-down adjusted p-values, in the input order.
pub fn holm_bonferroni(p: &[f64]) -> Result<Vec<f64>> {
    if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(invalid("p-values must lie in [0, 1]"));
    }
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let mut out = vec![0.0; m];
    let mut running = 0.0f64;
    for (j, &i) in order.iter().enumerate() {
        running = running.max(((m - j) as f64 * p[i]).min(1.0));
        out[i] = running;
    }
    Ok(out)
}

/// Midranks (1-based) of `x`.
pub(crate) fn midranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = rank;
        }
        i = j + 1;
    }
    r
}

/// Sizes of tie groups in `x`.
pub(crate) fn tie_sizes(x: &[f64]) -> Vec<usize> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        out.push(j - i + 1);
        i = j + 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn holm_hand_example() {
        let a = holm_bonferroni(&[0.01, 0.04, 0.03]).unwrap();
        for (x, y) in a.iter().zip([0.03, 0.06, 0.06]) {
            assert!((x - y).abs() < 1e-15);
        }
        assert_eq!(holm_bonferroni(&[0.2]).unwrap(), vec![0.2]);
    }

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(tie_sizes(&[3.0, 1.0, 3.0, 2.0]), vec![1, 1, 2]);
    }

    #[test]
    fn paired_t_symmetric_differences() {
        let r = paired_t(&[1.0, -1.0, 2.0, -2.0], &[0.0; 4]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p - 1.0).abs() < 1e-12);
        let shift = paired_t(&[2.0, 3.0, 4.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(shift.p, 0.0);
        assert!(!shift.notes.is_empty());
    }
}
