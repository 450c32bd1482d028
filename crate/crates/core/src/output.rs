//! On-disk formats: `trials.csv`, `summary.json`, `histogram.csv`.
//!
//! Every file is written to a temporary sibling and renamed into place, so a
//! reader never observes a half-written file.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tempfile::NamedTempFile;

use crate::config::{RunConfig, ScenarioConfig, StatsConfig};
use crate::error::{Error, Result};
use crate::harness::{Phase, TrialRecord};
use crate::stats::{self, PhaseStats, SummaryStats};

pub const TRIALS_FILE: &str = "trials.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const HISTOGRAM_FILE: &str = "histogram.csv";

pub const TRIAL_COLUMNS: [&str; 8] = [
    "scenario_id",
    "phase",
    "trial_index",
    "target_index",
    "steps",
    "completed",
    "final_distance",
    "seed",
];
pub const HISTOGRAM_COLUMNS: [&str; 4] = ["phase", "bin_low", "bin_high", "count"];

/// `phase` value of the row appended when a scenario aborts.
pub const ERROR_PHASE: &str = "error";

/// One line of `trials.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialCsvRow {
    pub scenario_id: String,
    /// `training`, `evaluation`, or [`ERROR_PHASE`] for the abort marker.
    pub phase: String,
    pub trial_index: usize,
    /// 1-based; 0 on the abort marker.
    pub target_index: usize,
    pub steps: usize,
    pub completed: bool,
    pub final_distance: f64,
    pub seed: u64,
}

impl TrialCsvRow {
    pub fn from_record(scenario_id: &str, seed: u64, r: &TrialRecord) -> Self {
        Self {
            scenario_id: scenario_id.to_string(),
            phase: r.phase.as_str().to_string(),
            trial_index: r.trial_index,
            target_index: r.target_index,
            steps: r.steps,
            completed: r.completed,
            final_distance: r.final_distance,
            seed,
        }
    }

    /// Marker for a scenario that stopped early. `steps` holds the step at
    /// which the failing trial stopped, when known.
    pub fn error_marker(scenario_id: &str, seed: u64, error: &Error) -> Self {
        let (trial_index, steps) = match error {
            Error::Trial { trial_index, source, .. } => match source.as_ref() {
                Error::Diverged { step } => (*trial_index, *step),
                _ => (*trial_index, 0),
            },
            Error::Diverged { step } => (0, *step),
            _ => (0, 0),
        };
        Self {
            scenario_id: scenario_id.to_string(),
            phase: ERROR_PHASE.to_string(),
            trial_index,
            target_index: 0,
            steps,
            completed: false,
            final_distance: f64::NAN,
            seed,
        }
    }

    pub fn is_error_marker(&self) -> bool {
        self.phase == ERROR_PHASE
    }

    fn to_record(&self) -> Option<TrialRecord> {
        let phase = match self.phase.as_str() {
            "training" => Phase::Training,
            "evaluation" => Phase::Evaluation,
            _ => return None,
        };
        Some(TrialRecord {
            phase,
            trial_index: self.trial_index,
            target_index: self.target_index,
            steps: self.steps,
            completed: self.completed,
            final_distance: self.final_distance,
        })
    }
}

/// Short, comma-free label for a scenario's rows.
pub fn scenario_id(cfg: &ScenarioConfig) -> String {
    format!(
        "t{}-n{}-lr{:e}-{}",
        cfg.n_targets,
        cfg.ensemble.n_neurons,
        cfg.ensemble.learning_rate,
        serde_json::to_value(cfg.ablation)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default()
    )
}

fn temp_beside(path: &Path) -> Result<NamedTempFile> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))
}

fn persist(tmp: NamedTempFile, path: &Path) -> Result<()> {
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Writes `bytes` to `path` via a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = temp_beside(path)?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.flush().map_err(|e| Error::io(path, e))?;
    persist(tmp, path)
}

/// Streams rows into a temporary file that becomes `trials.csv` on
/// [`TrialCsvWriter::finish`].
pub struct TrialCsvWriter {
    path: PathBuf,
    tmp: NamedTempFile,
    writer: csv::Writer<BufWriter<File>>,
}

impl TrialCsvWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let tmp = temp_beside(path)?;
        let file = tmp.reopen().map_err(|e| Error::io(path, e))?;
        let mut writer = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(BufWriter::new(file));
        writer.write_record(TRIAL_COLUMNS)?;
        Ok(Self {
            path: path.to_path_buf(),
            tmp,
            writer,
        })
    }

    /// Appends one row; rows reach the disk as the buffer fills.
    pub fn write(&mut self, row: &TrialCsvRow) -> Result<()> {
        self.writer.serialize(row)?;
        Ok(())
    }

    /// Flushes and renames into place.
    pub fn finish(self) -> Result<()> {
        let inner = self
            .writer
            .into_inner()
            .map_err(|e| Error::io(&self.path, e.into_error()))?;
        inner
            .into_inner()
            .map_err(|e| Error::io(&self.path, e.into_error()))?;
        persist(self.tmp, &self.path)
    }
}

pub fn write_trials(path: &Path, rows: &[TrialCsvRow]) -> Result<()> {
    let mut w = TrialCsvWriter::create(path)?;
    for row in rows {
        w.write(row)?;
    }
    w.finish()
}

fn schema(path: &Path, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Reads a `trials.csv`, checking the header against [`TRIAL_COLUMNS`].
pub fn read_trials(path: &Path) -> Result<Vec<TrialCsvRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| schema(path, format!("unreadable header: {e}")))?
        .clone();
    for column in TRIAL_COLUMNS {
        if !headers.iter().any(|h| h == column) {
            return Err(schema(path, format!("missing column `{column}`")));
        }
    }
    if let Some(extra) = headers.iter().find(|h| !TRIAL_COLUMNS.contains(h)) {
        return Err(schema(path, format!("unexpected column `{extra}`")));
    }
    if let Some((i, h)) = headers.iter().enumerate().find(|(i, h)| TRIAL_COLUMNS[*i] != *h) {
        return Err(schema(
            path,
            format!("column `{h}` at position {} should be `{}`", i + 1, TRIAL_COLUMNS[i]),
        ));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| schema(path, format!("row {}: {e}", line + 1)))?;
        let row: TrialCsvRow = record.deserialize(Some(&headers)).map_err(|e| {
            let field = match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err.field(),
                _ => None,
            };
            let column = field
                .and_then(|f| TRIAL_COLUMNS.get(f as usize))
                .map(|c| format!(" column `{c}`"))
                .unwrap_or_default();
            schema(path, format!("row {}{column}: {e}", line + 1))
        })?;
        if !row.is_error_marker() && row.to_record().is_none() {
            return Err(schema(
                path,
                format!("row {} column `phase`: unknown phase `{}`", line + 1, row.phase),
            ));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Splits rows into the two phases, dropping abort markers.
pub fn records_by_phase(rows: &[TrialCsvRow]) -> (Vec<TrialRecord>, Vec<TrialRecord>) {
    let records = rows.iter().filter_map(TrialCsvRow::to_record);
    records.partition(|r| r.phase == Phase::Training)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed,
}

/// Contents of `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub scenario_id: String,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Training-versus-evaluation comparison; absent when a phase is empty.
    pub summary: Option<SummaryStats>,
    pub training: Option<PhaseStats>,
    pub evaluation: Option<PhaseStats>,
    pub stats: StatsConfig,
    /// The fully resolved configuration, absent when recomputed from a CSV.
    pub config: Option<RunConfig>,
}

impl SummaryFile {
    /// Statistics over whatever records exist.
    pub fn compute(
        scenario_id: &str,
        training: &[TrialRecord],
        evaluation: &[TrialRecord],
        n_targets: usize,
        stats_cfg: &StatsConfig,
    ) -> Result<Self> {
        let (seed_t, seed_e) = stats::phase_seeds(stats_cfg);
        let phase = |records: &[TrialRecord], seed| -> Result<Option<PhaseStats>> {
            if records.is_empty() {
                Ok(None)
            } else {
                stats::phase_stats(records, stats_cfg, seed).map(Some)
            }
        };
        let summary = if training.len() >= 2 && evaluation.len() >= 2 {
            Some(stats::summarize(training, evaluation, n_targets, stats_cfg)?)
        } else {
            None
        };
        Ok(Self {
            scenario_id: scenario_id.to_string(),
            status: RunStatus::Ok,
            error: None,
            summary,
            training: phase(training, seed_t)?,
            evaluation: phase(evaluation, seed_e)?,
            stats: stats_cfg.clone(),
            config: None,
        })
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("summary always serializes");
        text.push('\n');
        text
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| schema(path, e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub phase: String,
    pub bin_low: f64,
    pub bin_high: f64,
    pub count: usize,
}

/// Equal-width bins over `[0, step_limit]`, one series per phase present in
/// `records` (training first). A value equal to `step_limit` lands in the
/// last bin.
pub fn histogram(records: &[TrialRecord], bins: usize, step_limit: usize) -> Result<Vec<HistogramRow>> {
    if bins == 0 {
        return Err(Error::Config("bins must be at least 1".into()));
    }
    if step_limit == 0 {
        return Err(Error::Config("step_limit must be at least 1".into()));
    }
    if let Some(r) = records.iter().find(|r| r.steps > step_limit) {
        return Err(Error::Config(format!(
            "trial with {} steps exceeds step_limit {step_limit}",
            r.steps
        )));
    }
    let width = step_limit as f64 / bins as f64;
    let mut rows = Vec::new();
    for phase in [Phase::Training, Phase::Evaluation] {
        let mut counts = vec![0usize; bins];
        let mut any = false;
        for r in records.iter().filter(|r| r.phase == phase) {
            any = true;
            let i = ((r.steps as f64 / width) as usize).min(bins - 1);
            counts[i] += 1;
        }
        if !any {
            continue;
        }
        rows.extend(counts.into_iter().enumerate().map(|(i, count)| HistogramRow {
            phase: phase.as_str().to_string(),
            bin_low: i as f64 * width,
            bin_high: if i + 1 == bins { step_limit as f64 } else { (i + 1) as f64 * width },
            count,
        }));
    }
    Ok(rows)
}

pub fn write_histogram(path: &Path, rows: &[HistogramRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(HISTOGRAM_COLUMNS)?;
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    write_atomic(path, &bytes)
}
