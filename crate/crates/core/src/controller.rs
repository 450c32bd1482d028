//! Joint-space control laws: PD, PID, and the adaptive controller whose
//! integral branch is a PES-trained neuron ensemble.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::neuro::{Ensemble, EnsembleState, PesConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdGains {
    /// N·m/rad
    pub kp: f64,
    /// N·m·s/rad
    pub kd: f64,
}

impl Default for PdGains {
    fn default() -> Self {
        Self { kp: 200.0, kd: 10.0 }
    }
}

impl PdGains {
    pub fn validate(&self) -> Result<()> {
        if self.kp > 0.0 && self.kd >= 0.0 && self.kp.is_finite() && self.kd.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("PD gains need kp > 0 and kd >= 0 (got {self:?})")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    /// N·m/(rad·s)
    pub ki: f64,
    pub kd: f64,
}

/// `τ = kp·(q_target − q) − kd·dq`
pub fn pd_torque(gains: &PdGains, q: &[f64], dq: &[f64], q_target: &[f64]) -> Result<Vec<f64>> {
    check_len("joint velocities", q.len(), dq.len())?;
    check_len("target angles", q.len(), q_target.len())?;
    Ok(q.iter()
        .zip(dq)
        .zip(q_target)
        .map(|((q, dq), qt)| gains.kp * (qt - q) - gains.kd * dq)
        .collect())
}

/// PID law with an explicit integral state.
///
/// The integral accumulates `(q_target − q)·dt` before the torque is
/// formed. Returns the torques and the updated integral.
pub fn pid_torque(
    gains: &PidGains,
    q: &[f64],
    dq: &[f64],
    q_target: &[f64],
    integral: &[f64],
    dt: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len("joint velocities", q.len(), dq.len())?;
    check_len("target angles", q.len(), q_target.len())?;
    check_len("integral state", q.len(), integral.len())?;
    let mut next = integral.to_vec();
    let mut tau = Vec::with_capacity(q.len());
    for i in 0..q.len() {
        let e = q_target[i] - q[i];
        next[i] += e * dt;
        tau.push(gains.kp * e + gains.ki * next[i] - gains.kd * dq[i]);
    }
    Ok((tau, next))
}

/// What the adaptive ensemble sees.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    /// Joint angles and velocities.
    #[default]
    State,
    /// Joint position error and velocities.
    Error,
}

/// Per-joint affine maps onto `[-1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    /// Joint angle range (rad), used in state mode.
    pub angle: Vec<(f64, f64)>,
    /// Position error range (rad), used in error mode.
    pub error: Vec<(f64, f64)>,
    /// Joint velocity range (rad/s).
    pub velocity: Vec<(f64, f64)>,
}

impl Normalization {
    pub fn symmetric(n_joints: usize, angle: f64, error: f64, velocity: f64) -> Self {
        Self {
            angle: vec![(-angle, angle); n_joints],
            error: vec![(-error, error); n_joints],
            velocity: vec![(-velocity, velocity); n_joints],
        }
    }

    pub fn n_joints(&self) -> usize {
        self.angle.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.angle.len();
        if self.error.len() != n || self.velocity.len() != n {
            return Err(Error::Config("normalization bounds differ in joint count".into()));
        }
        let bad = self
            .angle
            .iter()
            .chain(&self.error)
            .chain(&self.velocity)
            .find(|(lo, hi)| !(hi - lo > 0.0 && (hi - lo).is_finite()));
        match bad {
            Some(b) => Err(Error::Config(format!("normalization bound {b:?} has no width"))),
            None => Ok(()),
        }
    }

    /// Maps `(position-like, dq)` into `out`, clamping to `[-1, 1]`.
    /// Returns how many components were clamped.
    pub fn apply(&self, mode: InputMode, first: &[f64], dq: &[f64], out: &mut [f64]) -> usize {
        let n = self.n_joints();
        let bounds = match mode {
            InputMode::State => &self.angle,
            InputMode::Error => &self.error,
        };
        let mut saturated = 0;
        let values = first.iter().zip(bounds).chain(dq.iter().zip(&self.velocity));
        for (o, (v, (lo, hi))) in out[..2 * n].iter_mut().zip(values) {
            let x = 2.0 * (v - lo) / (hi - lo) - 1.0;
            if x > 1.0 || x < -1.0 {
                saturated += 1;
            }
            *o = x.clamp(-1.0, 1.0);
        }
        saturated
    }
}

/// Normalizes `(q, dq)` against state-mode bounds. Returns the vector and
/// the number of saturated components.
pub fn normalize_input(norm: &Normalization, q: &[f64], dq: &[f64]) -> (Vec<f64>, usize) {
    let mut out = vec![0.0; 2 * norm.n_joints()];
    let saturated = norm.apply(InputMode::State, q, dq, &mut out);
    (out, saturated)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub steps: u64,
    /// Input components clamped by normalization.
    pub saturated_components: u64,
    /// Largest magnitude of any adaptive torque component seen.
    pub max_abs_adaptive: f64,
}

/// PD controller plus a learned torque from a neuron ensemble.
#[derive(Clone, Debug)]
pub struct AdaptiveController {
    pub gains: PdGains,
    ensemble: Ensemble,
    ens_state: EnsembleState,
    pub pes: PesConfig,
    pub input_mode: InputMode,
    norm: Normalization,
    diagnostics: Diagnostics,
    input: Vec<f64>,
    error: Vec<f64>,
}

impl AdaptiveController {
    pub fn new(
        gains: PdGains,
        ensemble: Ensemble,
        pes: PesConfig,
        input_mode: InputMode,
        norm: Normalization,
    ) -> Result<Self> {
        gains.validate()?;
        norm.validate()?;
        let n = norm.n_joints();
        check_len("ensemble input", 2 * n, ensemble.dim_in())?;
        check_len("ensemble output", n, ensemble.dim_out())?;
        let ens_state = ensemble.new_state();
        Ok(Self {
            gains,
            ensemble,
            ens_state,
            pes,
            input_mode,
            norm,
            diagnostics: Diagnostics::default(),
            input: vec![0.0; 2 * n],
            error: vec![0.0; n],
        })
    }

    pub fn n_joints(&self) -> usize {
        self.norm.n_joints()
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    pub fn ensemble_state(&self) -> &EnsembleState {
        &self.ens_state
    }

    pub fn normalization(&self) -> &Normalization {
        &self.norm
    }

    pub fn diagnostics(&self) -> Diagnostics {
        self.diagnostics
    }

    /// PD torque plus the ensemble's decoded torque.
    ///
    /// When learning is enabled the decoders are then nudged by PES with the
    /// joint position error as teaching signal. With learning disabled the
    /// frozen decoders still contribute.
    pub fn adaptive_torque(&mut self, q: &[f64], dq: &[f64], q_target: &[f64]) -> Result<Vec<f64>> {
        let n = self.n_joints();
        check_len("joint angles", n, q.len())?;
        if q.iter().chain(dq).chain(q_target).any(|v| !v.is_finite()) {
            return Err(Error::ContractViolation("controller received a non-finite state".into()));
        }
        let mut tau = pd_torque(&self.gains, q, dq, q_target)?;

        for i in 0..n {
            self.error[i] = q_target[i] - q[i];
        }
        let first = match self.input_mode {
            InputMode::State => q,
            InputMode::Error => &self.error[..],
        };
        let saturated = self.norm.apply(self.input_mode, first, dq, &mut self.input);
        let adaptive = self.ensemble.step(&mut self.ens_state, &self.input)?;
        for (t, u) in tau.iter_mut().zip(adaptive) {
            *t += u;
            self.diagnostics.max_abs_adaptive = self.diagnostics.max_abs_adaptive.max(u.abs());
        }
        if self.pes.enabled {
            self.ensemble.apply_pes(&self.ens_state, &self.error, &self.pes)?;
        }
        self.diagnostics.steps += 1;
        self.diagnostics.saturated_components += saturated as u64;
        Ok(tau)
    }
}
