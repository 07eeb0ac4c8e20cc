//! `fesim stats`: the test-selection plan applied to an analysis report.

use std::path::PathBuf;

use fesim::stats::{effects, mauchly, rm_anova, select_tests, AnalysisPlan, Factor, RepeatedMeasures, ReportEntry, TestResult, ALPHA};
use fesim::trial::Condition;
use serde::{Deserialize, Serialize};

use crate::analyze::{AnalysisReport, TrialAnalysis, ANALYSIS_DIR, REPORT_FILE};
use crate::error::{data, Result};
use crate::files::{json_bytes, read_json, write};
use crate::Context;

pub const STATS_DIR: &str = "stats";
pub const STATS_FILE: &str = "stats.json";
pub const PLANS_FILE: &str = "plans.json";

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Analysis report; defaults to <out>/analysis/report.json.
    #[arg(long)]
    report: Option<PathBuf>,
}

/// One family of tests with its assumption checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub name: String,
    pub measure: String,
    pub level: Option<f64>,
    pub subjects: usize,
    pub cells: Vec<String>,
    pub plan: Option<AnalysisPlan>,
    /// Two-way ANOVA families report sphericity and F tests directly.
    pub sphericity: Vec<TestResult>,
    pub anova: Vec<TestResult>,
}

fn measure_value(t: &TrialAnalysis, measure: &str) -> f64 {
    match measure {
        "residual_force" => t.residual_force_pct,
        "normalized_rms" => t.final_normalized_rms(),
        _ => t.stim_amplitude_ma.unwrap_or(f64::NAN),
    }
}

fn one_way(report: &AnalysisReport, measure: &str, level: f64) -> Result<Option<(Family, Vec<ReportEntry>)>> {
    let conditions: Vec<Condition> = report.conditions.iter().copied().filter(|&c| report.subjects.iter().any(|&s| report.trial(s, c, level).is_some())).collect();
    if conditions.len() < 2 {
        return Ok(None);
    }
    let mut rows = Vec::new();
    for &s in &report.subjects {
        let row: Option<Vec<f64>> = conditions.iter().map(|&c| report.trial(s, c, level).map(|t| measure_value(t, measure))).collect();
        rows.push(row.ok_or_else(|| data(format!("subject {s} lacks a condition at level {level}")))?);
    }
    let labels: Vec<&str> = conditions.iter().map(|c| c.as_str()).collect();
    let rm = RepeatedMeasures::one_way("condition", &labels, rows)?;
    let plan = select_tests(&rm)?;
    let name = format!("{measure}@{level}");
    let entries = plan.entries().into_iter().map(|e| ReportEntry { test_name: format!("{name}: {}", e.test_name), ..e }).collect();
    let family = Family {
        name,
        measure: measure.into(),
        level: Some(level),
        subjects: rm.subjects(),
        cells: labels.iter().map(|s| s.to_string()).collect(),
        plan: Some(plan),
        sphericity: Vec::new(),
        anova: Vec::new(),
    };
    Ok(Some((family, entries)))
}

/// Frequency x level ANOVA on calibrated amplitudes.
fn amplitude_anova(report: &AnalysisReport) -> Result<Option<(Family, Vec<ReportEntry>)>> {
    let stim = [Condition::Lf, Condition::Hf];
    if !stim.iter().all(|c| report.conditions.contains(c)) || report.levels.len() < 2 {
        return Ok(None);
    }
    let mut rows = Vec::new();
    for &s in &report.subjects {
        let mut row = Vec::new();
        for c in stim {
            for &l in &report.levels {
                let t = report.trial(s, c, l).ok_or_else(|| data(format!("subject {s} lacks {} at level {l}", c.as_str())))?;
                row.push(measure_value(t, "stim_amplitude"));
            }
        }
        rows.push(row);
    }
    let level_names: Vec<String> = report.levels.iter().map(|l| l.to_string()).collect();
    let rm = RepeatedMeasures::new(
        vec![Factor::new("frequency", &["LF", "HF"]), Factor { name: "level".into(), levels: level_names }],
        rows,
    )?;
    let anova = rm_anova(&rm)?;
    let sphericity: Vec<TestResult> = effects(&rm).into_iter().filter_map(|e| mauchly(&rm, e).ok()).collect();
    let name = "stim_amplitude".to_string();
    let entries = anova
        .iter()
        .map(|r| ReportEntry {
            test_name: format!("{name}: {}", r.test_name),
            statistic: r.statistic,
            df: r.df.clone(),
            p_raw: r.p,
            p_adjusted: r.p,
            decision: if r.p < ALPHA { "reject" } else { "retain" }.into(),
        })
        .collect();
    let cells = (0..rm.cells()).map(|c| rm.cell_label(c)).collect();
    let family = Family { name: name.clone(), measure: name, level: None, subjects: rm.subjects(), cells, plan: None, sphericity, anova };
    Ok(Some((family, entries)))
}

pub fn run(ctx: &Context, args: &Args) -> Result<()> {
    let path = args.report.clone().unwrap_or_else(|| ctx.out.join(ANALYSIS_DIR).join(REPORT_FILE));
    let report: AnalysisReport = read_json(&path)?;
    if report.subjects.len() < 2 {
        return Err(data(format!("stats needs at least 2 subjects, the report has {}", report.subjects.len())));
    }
    let mut families = Vec::new();
    let mut entries = Vec::new();
    for &level in &report.levels {
        for measure in ["residual_force", "normalized_rms"] {
            if let Some((f, e)) = one_way(&report, measure, level)? {
                families.push(f);
                entries.extend(e);
            }
        }
    }
    if let Some((f, e)) = amplitude_anova(&report)? {
        families.push(f);
        entries.extend(e);
    }
    if entries.is_empty() {
        return Err(data("the report has no cells to compare (need at least two conditions at a level)"));
    }
    let dir = path.parent().and_then(|p| p.parent()).map(|p| p.join(STATS_DIR)).unwrap_or_else(|| ctx.out.join(STATS_DIR));
    write(&dir.join(STATS_FILE), &json_bytes(&entries))?;
    write(&dir.join(PLANS_FILE), &json_bytes(&families))?;
    for f in &families {
        let branch = f.plan.as_ref().map_or("two-way ANOVA".to_string(), |p| format!("{:?}", p.branch).to_lowercase());
        println!("{:<24} n={} {}", f.name, f.subjects, branch);
    }
    Ok(())
}
