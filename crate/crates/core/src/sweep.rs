//! Parameter sweeps: the Cartesian product of the sweep lists, one scenario
//! per cell, cells run on a bounded worker pool.

use std::path::Path;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::app::run_scenario_in;
use crate::config::{RunConfig, SweepConfig};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, with_workers, Execution};
use crate::harness::stream_rng;
use crate::output::{scenario_id, write_atomic};

pub const SWEEP_SUMMARY_FILE: &str = "sweep_summary.csv";
/// Per-cell seeds come from this RNG stream family of the base seed.
const CELL_SEED_STREAM: u64 = 1 << 32;

/// One grid point, with the run configuration it executes.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub index: usize,
    pub run: RunConfig,
}

impl SweepCell {
    pub fn dir_name(&self) -> String {
        format!("cell-{:03}", self.index)
    }
}

/// Seed of cell `index`, a pure function of the base seed and the index.
pub fn cell_seed(base: u64, index: usize) -> u64 {
    stream_rng(base, CELL_SEED_STREAM + index as u64).next_u64()
}

fn values<T: Clone>(list: &Option<Vec<T>>, current: T) -> Vec<T> {
    list.clone().unwrap_or_else(|| vec![current])
}

/// Grid cells in row-major order: neurons outermost, then learning rate,
/// then target count.
pub fn cells(run: &RunConfig) -> Vec<SweepCell> {
    let sweep = run.sweep.clone().unwrap_or_default();
    let base = &run.scenario;
    let neurons = values(&sweep.n_neurons, base.ensemble.n_neurons);
    let rates = values(&sweep.learning_rate, base.ensemble.learning_rate);
    let targets = values(&sweep.n_targets, base.n_targets);
    let mut out = Vec::with_capacity(neurons.len() * rates.len() * targets.len());
    for &n in &neurons {
        for &lr in &rates {
            for &t in &targets {
                let index = out.len();
                let mut cell = run.clone();
                cell.sweep = None;
                cell.scenario.ensemble.n_neurons = n;
                cell.scenario.ensemble.learning_rate = lr;
                cell.scenario.n_targets = t;
                if !sweep.shared_seed {
                    cell.scenario.seed = cell_seed(base.seed, index);
                }
                out.push(SweepCell { index, run: cell });
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed,
}

/// One line of `sweep_summary.csv`. Statistics are empty for failed cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cell: String,
    pub scenario_id: String,
    pub status: CellStatus,
    pub n_neurons: usize,
    pub learning_rate: f64,
    pub n_targets: usize,
    pub seed: u64,
    pub mean_training: Option<f64>,
    pub mean_evaluation: Option<f64>,
    pub ci_training_low: Option<f64>,
    pub ci_training_high: Option<f64>,
    pub ci_evaluation_low: Option<f64>,
    pub ci_evaluation_high: Option<f64>,
    pub p_value: Option<f64>,
    pub improvement_fraction: Option<f64>,
    pub completion_rate_training: Option<f64>,
    pub completion_rate_evaluation: Option<f64>,
    pub error: String,
}

impl SweepRow {
    fn new(cell: &SweepCell) -> Self {
        let s = &cell.run.scenario;
        Self {
            cell: cell.dir_name(),
            scenario_id: scenario_id(s),
            status: CellStatus::Ok,
            n_neurons: s.ensemble.n_neurons,
            learning_rate: s.ensemble.learning_rate,
            n_targets: s.n_targets,
            seed: s.seed,
            mean_training: None,
            mean_evaluation: None,
            ci_training_low: None,
            ci_training_high: None,
            ci_evaluation_low: None,
            ci_evaluation_high: None,
            p_value: None,
            improvement_fraction: None,
            completion_rate_training: None,
            completion_rate_evaluation: None,
            error: String::new(),
        }
    }
}

/// Runs every cell into `out/cell-NNN/` and writes `out/sweep_summary.csv`.
///
/// `workers` bounds the number of cells in flight (0 = one per core). A
/// failing cell is recorded with status `failed`; the others still run.
pub fn run_sweep(run: &RunConfig, out: &Path, workers: usize) -> Result<Vec<SweepRow>> {
    run.validate()?;
    let cells = cells(run);
    for cell in &cells {
        cell.run.validate()?;
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let rows = with_workers(workers, || {
        map_indexed(Execution::Parallel, cells.len(), |i| run_cell(&cells[i], out))
    });
    write_sweep_summary(&out.join(SWEEP_SUMMARY_FILE), &rows)?;
    Ok(rows)
}

fn run_cell(cell: &SweepCell, out: &Path) -> SweepRow {
    let mut row = SweepRow::new(cell);
    let dir = out.join(cell.dir_name());
    match std::fs::create_dir_all(&dir)
        .map_err(|e| Error::io(&dir, e))
        .and_then(|_| run_scenario_in(&cell.run, &dir))
    {
        Ok(summary) => {
            if let Some(t) = &summary.training {
                row.mean_training = Some(t.mean);
                row.ci_training_low = Some(t.ci.0);
                row.ci_training_high = Some(t.ci.1);
                row.completion_rate_training = Some(t.completion_rate);
            }
            if let Some(e) = &summary.evaluation {
                row.mean_evaluation = Some(e.mean);
                row.ci_evaluation_low = Some(e.ci.0);
                row.ci_evaluation_high = Some(e.ci.1);
                row.completion_rate_evaluation = Some(e.completion_rate);
            }
            if let Some(s) = &summary.summary {
                row.p_value = Some(s.p_value);
                row.improvement_fraction = Some(s.improvement_fraction);
            }
        }
        Err(e) => {
            row.status = CellStatus::Failed;
            row.error = e.to_string();
        }
    }
    row
}

pub fn write_sweep_summary(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    write_atomic(path, &bytes)
}

pub fn read_sweep_summary(path: &Path) -> Result<Vec<SweepRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Schema {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    reader
        .deserialize()
        .map(|r| {
            r.map_err(|e| Error::Schema {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
        })
        .collect()
}

/// True when `sweep` is absent or has no lists, i.e. a plain run.
pub fn is_plain_run(sweep: &Option<SweepConfig>) -> bool {
    sweep.as_ref().is_none_or(SweepConfig::is_empty)
}
