use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use neuroarm::app::{cmd_hist, cmd_run, cmd_stats, cmd_sweep, SweepOutcome};
use neuroarm::config::StatsConfig;
use neuroarm::output::SummaryFile;
use neuroarm::sweep::CellStatus;
use neuroarm::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

/// Adaptive arm control with a PES-trained spiking ensemble.
///
/// Output directories default to `$NEUROARM_OUTPUT_ROOT/<config stem>`
/// (or `neuroarm-out/<config stem>`) unless `--out` or the config's
/// `output_dir` says otherwise.
#[derive(Parser)]
#[command(name = "neuroarm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario: writes trials.csv and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every cell of the config's sweep grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Cells run concurrently (0 = one per core).
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Recompute summary statistics from a trials.csv.
    Stats {
        #[arg(long)]
        trials: PathBuf,
        /// Write summary.json into this directory instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = StatsConfig::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = StatsConfig::default().resamples)]
        resamples: usize,
        #[arg(long, default_value_t = StatsConfig::default().level)]
        level: f64,
    },
    /// Histogram of steps-to-target per phase: writes histogram.csv.
    Hist {
        #[arg(long)]
        trials: PathBuf,
        #[arg(long)]
        bins: usize,
        /// Upper edge of the last bin; read from a sibling summary.json if
        /// omitted, else 2000.
        #[arg(long)]
        step_limit: Option<usize>,
        /// Directory for histogram.csv; defaults to the trials file's.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn report(summary: &SummaryFile) {
    if let Some(s) = &summary.summary {
        println!(
            "training mean {:.1} steps [{:.1}, {:.1}], evaluation mean {:.1} steps [{:.1}, {:.1}], \
             improvement {:.3}, p = {:.3e}",
            s.mean_training,
            s.ci_training.0,
            s.ci_training.1,
            s.mean_evaluation,
            s.ci_evaluation.0,
            s.ci_evaluation.1,
            s.improvement_fraction,
            s.p_value
        );
    }
}

fn execute(command: Command) -> Result<u8, Error> {
    match command {
        Command::Run { config, out } => {
            let (dir, summary) = cmd_run(&config, out.as_deref())?;
            report(&summary);
            println!("wrote {}", dir.display());
        }
        Command::Sweep { config, out, workers } => {
            let (dir, outcome) = cmd_sweep(&config, out.as_deref(), workers)?;
            println!("wrote {}", dir.display());
            match outcome {
                SweepOutcome::Single(summary) => report(&summary),
                SweepOutcome::Grid(rows) => {
                    let failed: Vec<_> = rows.iter().filter(|r| r.status == CellStatus::Failed).collect();
                    println!("{} cells, {} failed", rows.len(), failed.len());
                    for row in &failed {
                        eprintln!("{}: {}", row.cell, row.error);
                    }
                    if !failed.is_empty() {
                        return Ok(EXIT_RUNTIME);
                    }
                }
            }
        }
        Command::Stats {
            trials,
            out,
            seed,
            resamples,
            level,
        } => {
            let cfg = StatsConfig { seed, resamples, level };
            let summary = cmd_stats(&trials, &cfg, out.as_deref())?;
            if out.is_none() {
                print!("{}", summary.to_json());
            }
        }
        Command::Hist {
            trials,
            bins,
            step_limit,
            out,
        } => {
            let path = cmd_hist(&trials, bins, step_limit, out.as_deref())?;
            println!("wrote {}", path.display());
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            e.print().ok();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { EXIT_VALIDATION } else { EXIT_RUNTIME })
        }
    }
}
