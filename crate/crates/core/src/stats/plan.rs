use serde::{Deserialize, Serialize};

use super::anova::effects;
use super::{friedman, holm_bonferroni, mauchly, paired_t, rm_anova, shapiro_wilk, wilcoxon_signed_rank, RepeatedMeasures, TestResult, ALPHA};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Parametric,
    Nonparametric,
}

/// One line of a stats report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub test_name: String,
    #[serde(with = "crate::nonfinite")]
    pub statistic: f64,
    pub df: Vec<f64>,
    pub p_raw: f64,
    pub p_adjusted: f64,
    pub decision: String,
}

impl ReportEntry {
    fn new(name: String, r: &TestResult, p_adjusted: f64) -> Self {
        Self {
            test_name: name,
            statistic: r.statistic,
            df: r.df.clone(),
            p_raw: r.p,
            p_adjusted,
            decision: if p_adjusted < ALPHA { "reject" } else { "retain" }.into(),
        }
    }
}

/// Assumption checks, the chosen branch, and its results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisPlan {
    pub branch: Branch,
    pub normality: Vec<TestResult>,
    pub sphericity: Vec<TestResult>,
    pub omnibus: Vec<ReportEntry>,
    pub posthoc: Vec<ReportEntry>,
}

impl AnalysisPlan {
    /// Omnibus and post-hoc entries in one list.
    pub fn entries(&self) -> Vec<ReportEntry> {
        self.omnibus.iter().chain(&self.posthoc).cloned().collect()
    }
}

/// Checks normality per cell and sphericity per effect, then runs either
/// RM ANOVA with paired t post-hocs or Friedman with Wilcoxon post-hocs.
/// Post-hoc families are Holm-corrected.
pub fn select_tests(rm: &RepeatedMeasures) -> Result<AnalysisPlan> {
    rm.validate()?;
    let k = rm.cells();
    let mut normal = true;
    let mut normality = Vec::with_capacity(k);
    for c in 0..k {
        let mut r = match shapiro_wilk(&rm.column(c)) {
            Ok(r) => r,
            Err(e) => {
                let mut r = TestResult::new("shapiro_wilk", f64::NAN, vec![rm.subjects() as f64], 0.0);
                r.notes.push(format!("not testable: {e}"));
                r
            }
        };
        r.test_name = format!("shapiro_wilk[{}]", rm.cell_label(c));
        normal &= r.p > ALPHA;
        normality.push(r);
    }
    let mut spherical = true;
    let mut sphericity = Vec::new();
    for e in effects(rm) {
        let r = match mauchly(rm, e) {
            Ok(r) => r,
            Err(err) => {
                let mut r = TestResult::new("mauchly", f64::NAN, vec![], 0.0);
                r.notes.push(format!("not testable: {err}"));
                r
            }
        };
        spherical &= r.p > ALPHA;
        sphericity.push(r);
    }
    let branch = if normal && spherical { Branch::Parametric } else { Branch::Nonparametric };

    let omnibus: Vec<ReportEntry> = match branch {
        Branch::Parametric => rm_anova(rm)?.iter().map(|r| ReportEntry::new(r.test_name.clone(), r, r.p)).collect(),
        Branch::Nonparametric => {
            let r = friedman(rm)?;
            vec![ReportEntry::new(r.test_name.clone(), &r, r.p)]
        }
    };

    let mut pairs = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            let (x, y) = (rm.column(a), rm.column(b));
            let r = match branch {
                Branch::Parametric => paired_t(&x, &y),
                Branch::Nonparametric => wilcoxon_signed_rank(&x, &y),
            };
            let r = r.unwrap_or_else(|e| {
                let name = match branch {
                    Branch::Parametric => "paired_t",
                    Branch::Nonparametric => "wilcoxon_signed_rank",
                };
                let mut r = TestResult::new(name, f64::NAN, vec![], 1.0);
                r.notes.push(format!("not testable: {e}"));
                r
            });
            pairs.push((format!("{}[{} vs {}]", r.test_name, rm.cell_label(a), rm.cell_label(b)), r));
        }
    }
    let adjusted = holm_bonferroni(&pairs.iter().map(|(_, r)| r.p).collect::<Vec<_>>())?;
    let posthoc = pairs.into_iter().zip(adjusted).map(|((name, r), p)| ReportEntry::new(name, &r, p)).collect();
    Ok(AnalysisPlan { branch, normality, sphericity, omnibus, posthoc })
}
