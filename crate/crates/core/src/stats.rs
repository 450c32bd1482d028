//! Bootstrap confidence intervals and Welch's t-test over time-to-target.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::config::StatsConfig;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::harness::{stream_rng, TrialRecord};

pub const MIN_RESAMPLES: usize = 1000;
/// Resamples drawn from one RNG stream. Fixing the chunk size keeps results
/// independent of how many threads do the work.
pub const RESAMPLE_CHUNK: usize = 1000;

pub fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Unbiased sample variance.
pub fn variance(samples: &[f64]) -> f64 {
    let m = mean(samples);
    samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (samples.len() as f64 - 1.0)
}

/// Means of `resamples` with-replacement resamples of `samples`.
///
/// Resample `k` is drawn from RNG stream `k / RESAMPLE_CHUNK` of `seed`.
pub fn resample_means(samples: &[f64], resamples: usize, seed: u64, exec: Execution) -> Vec<f64> {
    let n = samples.len();
    let chunks = resamples.div_ceil(RESAMPLE_CHUNK);
    map_indexed(exec, chunks, |c| {
        let mut rng = stream_rng(seed, c as u64);
        let len = RESAMPLE_CHUNK.min(resamples - c * RESAMPLE_CHUNK);
        (0..len)
            .map(|_| (0..n).map(|_| samples[rng.random_range(0..n)]).sum::<f64>() / n as f64)
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Linearly interpolated quantile of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Central `level` percentile interval of a set of bootstrap statistics.
pub fn percentile_interval(stats: &[f64], level: f64) -> Result<(f64, f64)> {
    if stats.is_empty() {
        return Err(Error::ContractViolation("no bootstrap statistics".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::ContractViolation(format!("level {level} must be in (0, 1)")));
    }
    let mut sorted = stats.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = quantile_sorted(&sorted, (1.0 - level) / 2.0);
    let hi = quantile_sorted(&sorted, (1.0 + level) / 2.0);
    Ok((lo, hi))
}

/// Percentile bootstrap interval for the mean.
pub fn bootstrap_mean_ci(
    samples: &[f64],
    resamples: usize,
    level: f64,
    seed: u64,
    exec: Execution,
) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::ContractViolation("bootstrap needs at least one sample".into()));
    }
    if resamples < MIN_RESAMPLES {
        return Err(Error::ContractViolation(format!(
            "bootstrap needs at least {MIN_RESAMPLES} resamples, got {resamples}"
        )));
    }
    if samples.iter().all(|s| *s == samples[0]) {
        return Ok((samples[0], samples[0]));
    }
    percentile_interval(&resample_means(samples, resamples, seed, exec), level)
}

/// Two-sided p-value of Welch's unequal-variance t-test.
///
/// When both groups have zero variance the result is 1 for equal means and
/// 0 otherwise.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::ContractViolation(
            "welch_t_test needs at least two samples per group".into(),
        ));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let (sa, sb) = (variance(a) / na, variance(b) / nb);
    let se2 = sa + sb;
    if se2 == 0.0 {
        return Ok(if ma == mb { 1.0 } else { 0.0 });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(student_t_two_sided(t, df))
}

/// `P(|T| ≥ |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    beta_reg(0.5 * df, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Mean, interval and completion rate of a single phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub n: usize,
    pub mean: f64,
    pub ci: (f64, f64),
    pub completion_rate: f64,
}

/// Training-versus-evaluation comparison of time-to-target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n_targets: usize,
    pub mean_training: f64,
    pub mean_evaluation: f64,
    pub ci_training: (f64, f64),
    pub ci_evaluation: (f64, f64),
    pub p_value: f64,
    /// `(mean_training − mean_evaluation) / mean_training`
    pub improvement_fraction: f64,
    pub completion_rate_training: f64,
    pub completion_rate_evaluation: f64,
}

impl SummaryStats {
    pub fn cis_disjoint(&self) -> bool {
        self.ci_evaluation.1 < self.ci_training.0 || self.ci_training.1 < self.ci_evaluation.0
    }
}

fn steps_of(records: &[TrialRecord]) -> Vec<f64> {
    records.iter().map(|r| r.steps as f64).collect()
}

fn completion_rate(records: &[TrialRecord]) -> f64 {
    records.iter().filter(|r| r.completed).count() as f64 / records.len() as f64
}

/// Statistics of one phase. Timed-out trials count at the step limit.
pub fn phase_stats(records: &[TrialRecord], cfg: &StatsConfig, seed: u64) -> Result<PhaseStats> {
    let steps = steps_of(records);
    Ok(PhaseStats {
        n: records.len(),
        mean: if steps.is_empty() { f64::NAN } else { mean(&steps) },
        ci: bootstrap_mean_ci(&steps, cfg.resamples, cfg.level, seed, Execution::Parallel)?,
        completion_rate: completion_rate(records),
    })
}

/// Bootstrap seeds for the two phases, both derived from the stats seed.
pub fn phase_seeds(cfg: &StatsConfig) -> (u64, u64) {
    (cfg.seed, cfg.seed.wrapping_add(1))
}

pub fn summarize(
    training: &[TrialRecord],
    evaluation: &[TrialRecord],
    n_targets: usize,
    cfg: &StatsConfig,
) -> Result<SummaryStats> {
    if training.is_empty() || evaluation.is_empty() {
        return Err(Error::ContractViolation(
            "summary needs records from both phases".into(),
        ));
    }
    let (seed_t, seed_e) = phase_seeds(cfg);
    let t = phase_stats(training, cfg, seed_t)?;
    let e = phase_stats(evaluation, cfg, seed_e)?;
    let p_value = welch_t_test(&steps_of(training), &steps_of(evaluation))?;
    Ok(SummaryStats {
        n_targets,
        mean_training: t.mean,
        mean_evaluation: e.mean,
        ci_training: t.ci,
        ci_evaluation: e.ci,
        p_value,
        improvement_fraction: (t.mean - e.mean) / t.mean,
        completion_rate_training: t.completion_rate,
        completion_rate_evaluation: e.completion_rate,
    })
}
