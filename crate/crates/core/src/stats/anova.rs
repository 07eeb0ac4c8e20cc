use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor};

use super::{RepeatedMeasures, TestResult};
use crate::error::{invalid, Error, Result};

/// An effect in a one- or two-factor design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    /// Main effect of factor 0 or 1.
    Main(usize),
    Interaction,
}

/// Orthonormal Helmert contrasts, `k x (k-1)`.
fn helmert(k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k, k - 1, |i, j| {
        let norm = (((j + 1) * (j + 2)) as f64).sqrt();
        if i <= j {
            1.0 / norm
        } else if i == j + 1 {
            -((j + 1) as f64) / norm
        } else {
            0.0
        }
    })
}

fn averaging(k: usize) -> DMatrix<f64> {
    DMatrix::from_element(k, 1, 1.0 / (k as f64).sqrt())
}

fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

fn contrasts(rm: &RepeatedMeasures, effect: Effect) -> Result<DMatrix<f64>> {
    let levels: Vec<usize> = rm.factors.iter().map(|f| f.levels.len()).collect();
    match (levels.as_slice(), effect) {
        ([k], Effect::Main(0)) => Ok(helmert(*k)),
        ([a, b], Effect::Main(0)) => Ok(kron(&helmert(*a), &averaging(*b))),
        ([a, b], Effect::Main(1)) => Ok(kron(&averaging(*a), &helmert(*b))),
        ([a, b], Effect::Interaction) => Ok(kron(&helmert(*a), &helmert(*b))),
        _ => Err(invalid(format!("effect {effect:?} does not exist in this design"))),
    }
}

fn effect_name(rm: &RepeatedMeasures, effect: Effect) -> String {
    match effect {
        Effect::Main(i) => rm.factors[i].name.clone(),
        Effect::Interaction => format!("{} x {}", rm.factors[0].name, rm.factors[1].name),
    }
}

/// Transformed scores `data * C`, one row per subject.
fn scores(rm: &RepeatedMeasures, c: &DMatrix<f64>) -> DMatrix<f64> {
    let n = rm.subjects();
    let x = DMatrix::from_fn(n, rm.cells(), |i, j| rm.data[i][j]);
    x * c
}

/// Centered sums-of-squares-and-products of the rows of `y`.
fn sscp(y: &DMatrix<f64>) -> DMatrix<f64> {
    let mean = y.row_mean();
    let mut centered = y.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    centered.transpose() * centered
}

/// Mauchly's sphericity test for one effect.
pub fn mauchly(rm: &RepeatedMeasures, effect: Effect) -> Result<TestResult> {
    rm.validate()?;
    let c = contrasts(rm, effect)?;
    let p = c.ncols();
    let name = format!("mauchly[{}]", effect_name(rm, effect));
    if p < 2 {
        return Ok(TestResult::new(name, 1.0, vec![0.0], 1.0).note("one-degree-of-freedom effect: sphericity holds trivially"));
    }
    let n = rm.subjects();
    if n <= p {
        return Err(invalid(format!("Mauchly's test needs more than {p} subjects, got {n}")));
    }
    let s = sscp(&scores(rm, &c)) / (n as f64 - 1.0);
    let trace = s.trace();
    if trace <= 0.0 {
        return Err(Error::Numeric("contrast covariance is zero".into()));
    }
    let pf = p as f64;
    let w = (s.determinant() / (trace / pf).powi(p as i32)).clamp(0.0, 1.0);
    let df = pf * (pf + 1.0) / 2.0 - 1.0;
    let f = 1.0 - (2.0 * pf * pf + pf + 2.0) / (6.0 * pf * (n as f64 - 1.0));
    let chi = -(n as f64 - 1.0) * f * w.ln();
    let dist = ChiSquared::new(df).map_err(|e| Error::Numeric(e.to_string()))?;
    let pval = if chi.is_finite() { dist.sf(chi.max(0.0)) } else { 0.0 };
    Ok(TestResult::new(name, w, vec![df], pval))
}

/// Every effect the design supports, in the order main effects then
/// interaction.
pub fn effects(rm: &RepeatedMeasures) -> Vec<Effect> {
    match rm.factors.len() {
        1 => vec![Effect::Main(0)],
        _ => vec![Effect::Main(0), Effect::Main(1), Effect::Interaction],
    }
}

/// Univariate repeated-measures ANOVA, one F test per effect.
pub fn rm_anova(rm: &RepeatedMeasures) -> Result<Vec<TestResult>> {
    rm.validate()?;
    let n = rm.subjects() as f64;
    effects(rm)
        .into_iter()
        .map(|e| {
            let c = contrasts(rm, e)?;
            let q = c.ncols() as f64;
            let y = scores(rm, &c);
            let mean = y.row_mean();
            let ss_effect = n * mean.norm_squared();
            let ss_error = sscp(&y).trace();
            let (df1, df2) = (q, q * (n - 1.0));
            let name = format!("rm_anova[{}]", effect_name(rm, e));
            let scale = rm.data.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
            let tiny = 1e-24 * scale * scale * n * q;
            if ss_effect <= tiny {
                return Ok(TestResult::new(name, 0.0, vec![df1, df2], 1.0));
            }
            if ss_error <= tiny {
                return Ok(TestResult::new(name, f64::INFINITY, vec![df1, df2], 0.0).note("zero error variance"));
            }
            let f = (ss_effect / df1) / (ss_error / df2);
            let dist = FisherSnedecor::new(df1, df2).map_err(|e| Error::Numeric(e.to_string()))?;
            Ok(TestResult::new(name, f, vec![df1, df2], dist.sf(f)))
        })
        .collect()
}
