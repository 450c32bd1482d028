//! The command implementations behind the `neuroarm` binary.

use std::path::{Path, PathBuf};

use crate::config::{RunConfig, StatsConfig};
use crate::error::{Error, Result};
use crate::harness::Scenario;
use crate::output::{
    histogram, read_trials, records_by_phase, scenario_id, write_histogram, RunStatus, SummaryFile,
    TrialCsvRow, TrialCsvWriter, HISTOGRAM_FILE, SUMMARY_FILE, TRIALS_FILE,
};
use crate::sweep::{is_plain_run, run_sweep, SweepRow};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "NEUROARM_OUTPUT_ROOT";
pub const DEFAULT_OUTPUT_ROOT: &str = "neuroarm-out";
/// Step limit assumed by `hist` when neither the caller nor a sibling
/// `summary.json` supplies one.
pub const DEFAULT_STEP_LIMIT: usize = 2000;

/// Output directory for a command: `explicit` if given, else the config's
/// `output_dir`, else `<root>/<config file stem>` where the root comes from
/// [`OUTPUT_ROOT_ENV`] or defaults to [`DEFAULT_OUTPUT_ROOT`].
pub fn resolve_out_dir(explicit: Option<&Path>, cfg: &RunConfig, config_path: &Path) -> PathBuf {
    if let Some(dir) = explicit {
        return dir.to_path_buf();
    }
    if let Some(dir) = &cfg.output_dir {
        return dir.clone();
    }
    let root = std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT));
    let stem = config_path.file_stem().map(PathBuf::from).unwrap_or_else(|| "run".into());
    root.join(stem)
}

/// Runs one scenario and writes `trials.csv` and `summary.json` into `dir`.
///
/// If the simulation aborts, the rows produced so far plus an error marker
/// row are still written, the summary is marked failed, and the error is
/// returned.
pub fn run_scenario_in(run: &RunConfig, dir: &Path) -> Result<SummaryFile> {
    run.validate()?;
    let cfg = &run.scenario;
    let scenario = Scenario::new(cfg)?;
    let id = scenario_id(cfg);
    let mut writer = TrialCsvWriter::create(&dir.join(TRIALS_FILE))?;
    let mut write_error = None;
    let outcome = scenario.run_with(&mut |r| {
        if write_error.is_none() {
            write_error = writer.write(&TrialCsvRow::from_record(&id, cfg.seed, r)).err();
        }
    });
    if let Some(e) = write_error {
        return Err(e);
    }
    let (partial, failure) = match outcome {
        Ok(o) => (o, None),
        Err(f) => (f.partial, Some(f.error)),
    };
    if let Some(e) = &failure {
        writer.write(&TrialCsvRow::error_marker(&id, cfg.seed, e))?;
    }
    writer.finish()?;
    let mut summary =
        SummaryFile::compute(&id, &partial.training, &partial.evaluation, cfg.n_targets, &run.stats)?;
    summary.config = Some(run.clone());
    if let Some(e) = &failure {
        summary.status = RunStatus::Failed;
        summary.error = Some(e.to_string());
    }
    summary.write(&dir.join(SUMMARY_FILE))?;
    match failure {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}

/// `run`: one scenario into the resolved output directory.
pub fn cmd_run(config_path: &Path, out: Option<&Path>) -> Result<(PathBuf, SummaryFile)> {
    let run = RunConfig::load(config_path)?;
    let dir = resolve_out_dir(out, &run, config_path);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let summary = run_scenario_in(&run, &dir)?;
    Ok((dir, summary))
}

/// What `sweep` produced.
#[derive(Debug)]
pub enum SweepOutcome {
    /// The config had no sweep lists, so it ran as a single scenario.
    Single(SummaryFile),
    Grid(Vec<SweepRow>),
}

/// `sweep`: every grid cell into its own subdirectory. A config without
/// sweep lists behaves like `run`.
pub fn cmd_sweep(config_path: &Path, out: Option<&Path>, workers: usize) -> Result<(PathBuf, SweepOutcome)> {
    let run = RunConfig::load(config_path)?;
    let dir = resolve_out_dir(out, &run, config_path);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    if is_plain_run(&run.sweep) {
        let summary = run_scenario_in(&run, &dir)?;
        return Ok((dir, SweepOutcome::Single(summary)));
    }
    let rows = run_sweep(&run, &dir, workers)?;
    Ok((dir, SweepOutcome::Grid(rows)))
}

/// `stats`: recomputes the summary of an existing `trials.csv`. The target
/// count is taken as the largest target index in the file.
pub fn cmd_stats(trials: &Path, stats_cfg: &StatsConfig, out: Option<&Path>) -> Result<SummaryFile> {
    if stats_cfg.resamples < crate::stats::MIN_RESAMPLES {
        return Err(Error::Config(format!(
            "resamples must be at least {}",
            crate::stats::MIN_RESAMPLES
        )));
    }
    if !(stats_cfg.level > 0.0 && stats_cfg.level < 1.0) {
        return Err(Error::Config("level must be in (0, 1)".into()));
    }
    let rows = read_trials(trials)?;
    let (training, evaluation) = records_by_phase(&rows);
    let n_targets = training
        .iter()
        .chain(&evaluation)
        .map(|r| r.target_index)
        .max()
        .unwrap_or(0);
    let id = rows.first().map(|r| r.scenario_id.clone()).unwrap_or_default();
    let mut summary = SummaryFile::compute(&id, &training, &evaluation, n_targets, stats_cfg)?;
    if rows.iter().any(TrialCsvRow::is_error_marker) {
        summary.status = RunStatus::Failed;
        summary.error = Some("trials file ends with an error marker".into());
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        summary.write(&dir.join(SUMMARY_FILE))?;
    }
    Ok(summary)
}

/// Step limit recorded in the `summary.json` next to `trials`, if any.
pub fn sibling_step_limit(trials: &Path) -> Option<usize> {
    let summary = trials.parent()?.join(SUMMARY_FILE);
    let file = SummaryFile::read(&summary).ok()?;
    file.config.map(|c| c.scenario.step_limit)
}

/// `hist`: equal-width histogram of steps per phase. Written to
/// `out/histogram.csv`, or beside `trials` when `out` is absent. The step
/// limit defaults to the one in a sibling `summary.json`, then to
/// [`DEFAULT_STEP_LIMIT`].
pub fn cmd_hist(trials: &Path, bins: usize, step_limit: Option<usize>, out: Option<&Path>) -> Result<PathBuf> {
    if bins == 0 {
        return Err(Error::Config("bins must be at least 1".into()));
    }
    let rows = read_trials(trials)?;
    let (mut records, evaluation) = records_by_phase(&rows);
    records.extend(evaluation);
    let limit = step_limit
        .or_else(|| sibling_step_limit(trials))
        .unwrap_or(DEFAULT_STEP_LIMIT);
    let hist = histogram(&records, bins, limit).map_err(|e| match e {
        Error::Config(message) => Error::Schema {
            path: trials.to_path_buf(),
            message,
        },
        other => other,
    })?;
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => trials.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    if !dir.as_os_str().is_empty() {
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let path = dir.join(HISTOGRAM_FILE);
    write_histogram(&path, &hist)?;
    Ok(path)
}
