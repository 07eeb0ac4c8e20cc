//! Command-line pipeline for the fatigue simulator: simulate trials, clean
//! artifacts, analyze fatigue, run the statistics and write reports.

pub mod analyze;
pub mod clean;
pub mod error;
pub mod files;
pub mod manifest;
pub mod report;
pub mod simulate;
pub mod stats;
pub mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fesim::config::ExperimentConfig;

use crate::error::{io, usage, Result};

#[derive(Debug, Parser)]
#[command(name = "fesim", version, about = "Fatigue under low- and kilohertz-frequency stimulation versus voluntary contraction")]
struct Cli {
    /// Experiment configuration (JSON); built-in defaults otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory, overriding the configuration's output_dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to the available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Print the default configuration and exit.
    #[arg(long)]
    print_defaults: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the trial battery and write a run directory.
    Simulate(simulate::Args),
    /// Remove stimulation artifacts from a binary EMG record.
    Clean(clean::Args),
    /// Compute force and EMG metrics for every trial of a run.
    Analyze(analyze::Args),
    /// Run the statistical plan on an analysis report.
    Stats(stats::Args),
    /// Write summary tables and plots.
    Report(report::Args),
}

/// Settings resolved from the global flags.
pub struct Context {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    pub jobs: usize,
    pub seed_override: Option<u64>,
}

impl Context {
    fn new(cli: &Cli) -> Result<Self> {
        let mut config = match &cli.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| io(p, e))?;
                ExperimentConfig::from_json(&text).map_err(|e| usage(format!("{}: {}", p.display(), error::CliError::from(e))))?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(s) = cli.seed {
            config.seed = s;
        }
        let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(&config.output_dir));
        let jobs = match cli.jobs {
            Some(0) => return Err(usage("--jobs must be at least 1")),
            Some(j) => j,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        Ok(Self { config, out, jobs, seed_override: cli.seed })
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.print_defaults {
        use std::io::Write as _;
        let mut out = std::io::stdout().lock();
        return match writeln!(out, "{}", ExperimentConfig::default().to_json()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(io(std::path::Path::new("<stdout>"), e)),
            _ => Ok(()),
        };
    }
    let ctx = Context::new(&cli)?;
    match &cli.command {
        Some(Command::Simulate(a)) => simulate::run(&ctx, a),
        Some(Command::Clean(a)) => clean::run(&ctx, a),
        Some(Command::Analyze(a)) => analyze::run(&ctx, a),
        Some(Command::Stats(a)) => stats::run(&ctx, a),
        Some(Command::Report(a)) => report::run(&ctx, a),
        None => Err(usage("no command given; see --help")),
    }
}

/// Parses `args` (program name first) and runs the command, mapping errors
/// to their exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            eprintln!("error[usage]: {}", msg.trim_start_matches("error: ").trim_end());
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
