//! `fesim report`: summary tables and plots from an analysis report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fesim::stats::ReportEntry;
use fesim::trial::Condition;

use crate::analyze::{AnalysisReport, CellSummary, MeanSe, ANALYSIS_DIR, REPORT_FILE};
use crate::error::{data, Result};
use crate::files::{read, read_json, write};
use crate::stats::{STATS_DIR, STATS_FILE};
use crate::svg::{self, Series};
use crate::Context;

pub const REPORT_DIR: &str = "report";

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Analysis report; defaults to <out>/analysis/report.json.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn pct(level: f64) -> String {
    format!("{:.0}", 100.0 * level)
}

fn cell_csv(cells: &[CellSummary], value: impl Fn(&CellSummary) -> Option<&MeanSe>) -> String {
    let mut s = String::from("level,condition,mean,se,n\n");
    for c in cells {
        if let Some(m) = value(c) {
            let se = m.se.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{se},{}", c.level, c.condition.as_str(), m.mean, m.n);
        }
    }
    s
}

fn md_cell(m: Option<&MeanSe>) -> String {
    match m {
        Some(m) => match m.se {
            Some(se) => format!("{:.2} ± {:.2}", m.mean, se),
            None => format!("{:.2}", m.mean),
        },
        None => "-".into(),
    }
}

/// Markdown table with levels as rows and conditions as columns.
fn md_table(report: &AnalysisReport, conditions: &[Condition], value: impl Fn(&CellSummary) -> Option<&MeanSe>) -> String {
    let mut s = String::from("| Level |");
    for c in conditions {
        let _ = write!(s, " {} |", c.as_str());
    }
    s.push_str("\n|---|");
    s.push_str(&"---|".repeat(conditions.len()));
    s.push('\n');
    for &l in &report.levels {
        let _ = write!(s, "| {}% MVC |", pct(l));
        for &c in conditions {
            let cell = report.cells.iter().find(|x| x.condition == c && (x.level - l).abs() < 1e-9);
            let _ = write!(s, " {} |", md_cell(cell.and_then(&value)));
        }
        s.push('\n');
    }
    s
}

/// Smoothed %MVC series of one trial.
fn read_smoothed(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = String::from_utf8(read(path)?).map_err(|_| data(format!("{} is not UTF-8", path.display())))?;
    text.lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            match (f.first().and_then(|v| v.parse().ok()), f.get(2).and_then(|v| v.parse().ok())) {
                (Some(t), Some(p)) if f.len() == 3 => Ok((t, p)),
                _ => Err(data(format!("{}: malformed row {line:?}", path.display()))),
            }
        })
        .collect()
}

fn mean_series(series: &[Vec<(f64, f64)>]) -> Vec<(f64, f64)> {
    let n = series.iter().map(Vec::len).min().unwrap_or(0);
    (0..n).map(|i| (series[0][i].0, series.iter().map(|s| s[i].1).sum::<f64>() / series.len() as f64)).collect()
}

pub fn run(ctx: &Context, args: &Args) -> Result<()> {
    let path = args.report.clone().unwrap_or_else(|| ctx.out.join(ANALYSIS_DIR).join(REPORT_FILE));
    let report: AnalysisReport = read_json(&path)?;
    let analysis_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let root = analysis_dir.parent().map(Path::to_path_buf).unwrap_or_default();
    let out = root.join(REPORT_DIR);
    let stats_path = root.join(STATS_DIR).join(STATS_FILE);
    let stats: Option<Vec<ReportEntry>> = if stats_path.exists() { Some(read_json(&stats_path)?) } else { None };

    write(&out.join("residual_force.csv"), cell_csv(&report.cells, |c| Some(&c.residual_force_pct)).as_bytes())?;
    write(&out.join("stim_amplitude.csv"), cell_csv(&report.cells, |c| c.stim_amplitude_ma.as_ref()).as_bytes())?;
    write(&out.join("vector_strength.csv"), cell_csv(&report.cells, |c| c.vector_strength.as_ref()).as_bytes())?;
    let mut nrms = String::from("level,condition,period_start,period_end,mean,se,n\n");
    for c in &report.cells {
        let periods = &report.trials.iter().find(|t| t.condition == c.condition && (t.level - c.level).abs() < 1e-9).expect("cell has trials").periods;
        for (m, (a, b)) in c.normalized_rms.iter().zip(&periods.0) {
            let se = m.se.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(nrms, "{},{},{a},{b},{},{se},{}", c.level, c.condition.as_str(), m.mean, m.n);
        }
    }
    write(&out.join("normalized_rms.csv"), nrms.as_bytes())?;

    for &level in &report.levels {
        let mut force = Vec::new();
        let mut rms = Vec::new();
        for &c in &report.conditions {
            let trials: Vec<_> = report.trials.iter().filter(|t| t.condition == c && (t.level - level).abs() < 1e-9).collect();
            if trials.is_empty() {
                continue;
            }
            let series: Vec<Vec<(f64, f64)>> = trials.iter().map(|t| read_smoothed(&analysis_dir.join(&t.dir).join("force_smoothed.csv"))).collect::<Result<_>>()?;
            force.push(Series { label: c.as_str().into(), points: mean_series(&series) });
            let cell = report.cells.iter().find(|x| x.condition == c && (x.level - level).abs() < 1e-9).expect("cell exists");
            let points = trials[0].periods.0.iter().zip(&cell.normalized_rms).map(|((a, b), m)| (0.5 * (a + b), m.mean)).collect();
            rms.push(Series { label: c.as_str().into(), points });
        }
        let p = pct(level);
        let svg = svg::line_plot(&format!("Force at {p}% MVC (subject mean)"), "time (s)", "force (% MVC)", &force);
        write(&out.join(format!("force_{p}.svg")), svg.as_bytes())?;
        let svg = svg::line_plot(&format!("Normalized RMS at {p}% MVC"), "period midpoint (s)", "RMS / initial RMS", &rms);
        write(&out.join(format!("normalized_rms_{p}.svg")), svg.as_bytes())?;
    }

    let stim: Vec<Condition> = report.conditions.iter().copied().filter(|c| c.is_stimulated()).collect();
    let mut md = String::from("# fesim run summary\n\n");
    let _ = writeln!(md, "Subjects: {}. Values are mean ± standard error.\n", report.subjects.len());
    md.push_str("## Residual force in the final period (% MVC)\n\n");
    md.push_str(&md_table(&report, &report.conditions, |c| Some(&c.residual_force_pct)));
    md.push_str("\n## Initial force, 5-15 s (% MVC)\n\n");
    md.push_str(&md_table(&report, &report.conditions, |c| Some(&c.initial_force_pct)));
    if !stim.is_empty() {
        md.push_str("\n## Stimulation amplitude (mA)\n\n");
        md.push_str(&md_table(&report, &stim, |c| c.stim_amplitude_ma.as_ref()));
        md.push_str("\n## Vector strength at the 30 Hz repetition rate\n\n");
        md.push_str(&md_table(&report, &stim, |c| c.vector_strength.as_ref()));
        md.push_str("\n## Artifact removal attenuation on trial excerpts (dB)\n\n");
        md.push_str(&md_table(&report, &stim, |c| c.removal_attenuation_db.as_ref()));
    }
    md.push_str("\n## Normalized RMS in the final period\n\n");
    md.push_str(&md_table(&report, &report.conditions, |c| Some(&c.final_normalized_rms)));
    if let Some(entries) = &stats {
        md.push_str("\n## Statistics\n\n| Test | Statistic | df | p | p (Holm) | Decision |\n|---|---|---|---|---|---|\n");
        for e in entries {
            let df: Vec<String> = e.df.iter().map(|d| format!("{d}")).collect();
            let stat = if e.statistic.is_finite() { format!("{:.4}", e.statistic) } else { "-".into() };
            let _ = writeln!(md, "| {} | {stat} | {} | {:.4} | {:.4} | {} |", e.test_name, df.join(", "), e.p_raw, e.p_adjusted, e.decision);
        }
    }
    write(&out.join("summary.md"), md.as_bytes())?;
    println!("wrote {}", out.display());
    Ok(())
}
