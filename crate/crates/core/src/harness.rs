//! Reach-task protocol: target generation, an ordered training phase, a
//! randomized evaluation phase, and per-trial records.
//!
//! One scenario is strictly sequential: the arm state and the learned
//! decoders carry over from trial to trial and from phase to phase.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::armsim::{ArmModel, ArmState, Target};
use crate::config::ScenarioConfig;
use crate::controller::AdaptiveController;
use crate::error::{Error, Result};

/// Fraction of total reach bounding the sampled target annulus.
pub const TARGET_ANNULUS: (f64, f64) = (0.3, 0.9);
pub const MAX_TARGET_REJECTIONS: usize = 10_000;
/// Offset added to every joint of the first target to get the start pose.
pub const START_OFFSET_RAD: f64 = 0.3;

/// RNG stream ids of a scenario's seed: target placement, ensemble
/// generation and evaluation-phase target draws.
pub const STREAM_TARGETS: u64 = 1;
pub const STREAM_ENSEMBLE: u64 = 2;
pub const STREAM_EVALUATION: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Training,
    Evaluation,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Training => "training",
            Phase::Evaluation => "evaluation",
        }
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of one reach task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub phase: Phase,
    /// 0-based position within its phase.
    pub trial_index: usize,
    /// 1-based target ordinal.
    pub target_index: usize,
    pub steps: usize,
    pub completed: bool,
    /// End-effector distance to the target when the trial ended (m).
    pub final_distance: f64,
}

/// Seeded RNG for one of the scenario's independent random streams.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Samples `n` reachable targets uniformly (by area) in the annulus
/// `TARGET_ANNULUS · reach`, numbered 1..=n in sampling order.
pub fn generate_targets<R: Rng + ?Sized>(model: &ArmModel, n: usize, rng: &mut R) -> Result<Vec<Target>> {
    if n < 2 {
        return Err(Error::Config(format!("need at least 2 targets, got {n}")));
    }
    let reach = model.reach();
    let (r_in, r_out) = (TARGET_ANNULUS.0 * reach, TARGET_ANNULUS.1 * reach);
    let mut targets = Vec::with_capacity(n);
    let mut rejections = 0;
    while targets.len() < n {
        let x = r_out * (2.0 * rng.random::<f64>() - 1.0);
        let y = r_out * (2.0 * rng.random::<f64>() - 1.0);
        let r = x.hypot(y);
        let accepted = (r_in..=r_out).contains(&r)
            && Target::solve(model, [x, y], targets.len() + 1)
                .map(|t| targets.push(t))
                .is_ok();
        if !accepted {
            rejections += 1;
            if rejections > MAX_TARGET_REJECTIONS {
                return Err(Error::Config(format!(
                    "could not place {n} targets after {MAX_TARGET_REJECTIONS} rejections"
                )));
            }
        }
    }
    Ok(targets)
}

/// Drives the arm toward `target` for at most `step_limit` steps.
///
/// Stops at the first step where the end-effector is within tolerance; a
/// trial that starts inside the tolerance takes 0 steps. Returns the record
/// (with `phase` and `trial_index` filled in by the caller) and the final arm
/// state.
pub fn run_trial(
    ctrl: &mut AdaptiveController,
    model: &ArmModel,
    state: ArmState,
    target: &Target,
    step_limit: usize,
    tol_frac: f64,
) -> Result<(TrialRecord, ArmState)> {
    let mut state = state;
    let mut steps = 0;
    let mut completed = model.reached(&state, target, tol_frac);
    while !completed && steps < step_limit {
        let mut tau = ctrl.adaptive_torque(&state.q, &state.dq, &target.q_target)?;
        model.clamp_torques(&mut tau);
        state = model.dynamics_step(&state, &tau).map_err(|e| match e {
            Error::Diverged { .. } => Error::Diverged { step: steps },
            other => other,
        })?;
        steps += 1;
        completed = model.reached(&state, target, tol_frac);
    }
    let record = TrialRecord {
        phase: Phase::Training,
        trial_index: 0,
        target_index: target.index,
        steps,
        completed,
        final_distance: model.distance_to(&state, target)?,
    };
    Ok((record, state))
}

/// Everything a finished (or aborted) scenario produced.
#[derive(Clone, Debug, Default)]
pub struct ScenarioOutcome {
    pub training: Vec<TrialRecord>,
    pub evaluation: Vec<TrialRecord>,
    /// Decoders as they stood when the training phase ended.
    pub decoders_after_training: Vec<f64>,
    pub final_decoders: Vec<f64>,
}

#[derive(Debug)]
pub struct ScenarioFailure {
    pub partial: ScenarioOutcome,
    pub error: Error,
}

/// A configured scenario: arm, targets, controller and the evolving arm
/// state.
#[derive(Clone, Debug)]
pub struct Scenario {
    cfg: ScenarioConfig,
    model: ArmModel,
    targets: Vec<Target>,
    controller: AdaptiveController,
    state: ArmState,
    eval_rng: ChaCha8Rng,
    last_target: Option<usize>,
}

impl Scenario {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let model = cfg.arm_model()?;
        let targets = generate_targets(&model, cfg.n_targets, &mut stream_rng(cfg.seed, STREAM_TARGETS))?;
        let controller = cfg.build_controller(&mut stream_rng(cfg.seed, STREAM_ENSEMBLE))?;
        let start = targets[0].q_target.iter().map(|q| q + START_OFFSET_RAD).collect();
        Ok(Self {
            cfg: cfg.clone(),
            model,
            targets,
            controller,
            state: ArmState::at_rest(start),
            eval_rng: stream_rng(cfg.seed, STREAM_EVALUATION),
            last_target: None,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn model(&self) -> &ArmModel {
        &self.model
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn controller(&self) -> &AdaptiveController {
        &self.controller
    }

    pub fn controller_mut(&mut self) -> &mut AdaptiveController {
        &mut self.controller
    }

    pub fn arm_state(&self) -> &ArmState {
        &self.state
    }

    fn trial(&mut self, phase: Phase, trial_index: usize, target: usize) -> Result<TrialRecord> {
        let start = self.state.clone();
        let (mut record, end) = run_trial(
            &mut self.controller,
            &self.model,
            start,
            &self.targets[target],
            self.cfg.step_limit,
            self.cfg.tol_frac,
        )
        .map_err(|e| Error::Trial {
            phase: phase.as_str(),
            trial_index,
            source: Box::new(e),
        })?;
        record.phase = phase;
        record.trial_index = trial_index;
        self.state = end;
        self.last_target = Some(target);
        Ok(record)
    }

    /// `training_cycles` ordered passes over the targets (1, 2, …, n, 1, …).
    /// Skipped entirely under the no-training ablation.
    pub fn run_training_phase(&mut self, sink: &mut dyn FnMut(&TrialRecord)) -> Result<Vec<TrialRecord>> {
        self.controller.pes.enabled = self.cfg.ablation.learns_in_training();
        let cycles = match self.cfg.ablation {
            crate::config::Ablation::NoTraining => 0,
            _ => self.cfg.training_cycles,
        };
        let n = self.targets.len();
        let mut records = Vec::with_capacity(cycles * n);
        for trial_index in 0..cycles * n {
            let record = self.trial(Phase::Training, trial_index, trial_index % n)?;
            sink(&record);
            records.push(record);
        }
        Ok(records)
    }

    /// `eval_trials` reaches to uniformly drawn targets, never repeating the
    /// target just visited.
    pub fn run_evaluation_phase(&mut self, sink: &mut dyn FnMut(&TrialRecord)) -> Result<Vec<TrialRecord>> {
        self.controller.pes.enabled = self.cfg.ablation.learns_in_evaluation();
        let n = self.targets.len();
        let mut records = Vec::with_capacity(self.cfg.eval_trials);
        for trial_index in 0..self.cfg.eval_trials {
            let target = loop {
                let t = self.eval_rng.random_range(0..n);
                if Some(t) != self.last_target {
                    break t;
                }
            };
            let record = self.trial(Phase::Evaluation, trial_index, target)?;
            sink(&record);
            records.push(record);
        }
        Ok(records)
    }

    /// Runs both phases, streaming every record to `sink` as it completes.
    pub fn run_with(mut self, sink: &mut dyn FnMut(&TrialRecord)) -> Result<ScenarioOutcome, ScenarioFailure> {
        let mut outcome = ScenarioOutcome::default();
        let mut collected = Vec::new();
        let mut tee = |r: &TrialRecord| {
            collected.push(r.clone());
            sink(r);
        };
        match self.run_training_phase(&mut tee) {
            Ok(records) => outcome.training = records,
            Err(error) => {
                outcome.training = collected;
                return Err(ScenarioFailure { partial: outcome, error });
            }
        }
        collected = Vec::new();
        outcome.decoders_after_training = self.controller.ensemble().decoders().to_vec();
        let mut tee = |r: &TrialRecord| {
            collected.push(r.clone());
            sink(r);
        };
        match self.run_evaluation_phase(&mut tee) {
            Ok(records) => outcome.evaluation = records,
            Err(error) => {
                outcome.evaluation = collected;
                return Err(ScenarioFailure { partial: outcome, error });
            }
        }
        outcome.final_decoders = self.controller.ensemble().decoders().to_vec();
        Ok(outcome)
    }

    pub fn run(self) -> Result<ScenarioOutcome, ScenarioFailure> {
        self.run_with(&mut |_| {})
    }
}
