//! Run configuration, read from TOML. Keys carry their units.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::armsim::ArmModel;
use crate::controller::{AdaptiveController, InputMode, Normalization, PdGains};
use crate::error::{Error, Result};
use crate::neuro::{Ensemble, EnsembleParams, LifParams, NeuronMode, PesConfig};

/// PES rate for the desk-scale plant; see the README for how it relates to
/// the rates quoted for other simulators.
pub const CALIBRATED_LEARNING_RATE: f64 = 1e-3;

/// Derivative gain of the desk-scale preset. The default arm is far heavier
/// than a desk manipulator, so the stock `kd` leaves it badly underdamped.
pub const DESK_KD_NMS_PER_RAD: f64 = 60.0;
/// Velocity bound of the desk-scale preset's input normalization.
pub const DESK_VELOCITY_BOUND_RAD_PER_S: f64 = 20.0;
/// Seed of the desk-scale preset.
pub const DESK_SEED: u64 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmConfig {
    pub link_lengths_m: Vec<f64>,
    pub link_masses_kg: Vec<f64>,
    /// Defaults to uniform rods, `m·l²/12`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub link_inertias_kg_m2: Option<Vec<f64>>,
    pub joint_friction_nms_per_rad: f64,
    pub gravity_m_per_s2: f64,
    pub max_torque_nm: f64,
    pub dt_s: f64,
}

impl Default for ArmConfig {
    fn default() -> Self {
        let m = ArmModel::default();
        Self {
            link_lengths_m: m.link_lengths,
            link_masses_kg: m.link_masses,
            link_inertias_kg_m2: None,
            joint_friction_nms_per_rad: m.joint_viscous_friction,
            gravity_m_per_s2: m.gravity,
            max_torque_nm: m.max_torque,
            dt_s: m.dt,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub kp_nm_per_rad: f64,
    pub kd_nms_per_rad: f64,
    pub input_mode: InputMode,
    /// Joint angles in `[-b, b]` map onto the ensemble's unit range.
    pub angle_bound_rad: f64,
    pub error_bound_rad: f64,
    pub velocity_bound_rad_per_s: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        let g = PdGains::default();
        Self {
            kp_nm_per_rad: g.kp,
            kd_nms_per_rad: g.kd,
            input_mode: InputMode::State,
            angle_bound_rad: PI,
            error_bound_rad: PI,
            velocity_bound_rad_per_s: 2.0 * PI,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_neurons: usize,
    pub learning_rate: f64,
    pub mode: NeuronMode,
    pub tau_rc_s: f64,
    pub tau_ref_s: f64,
    pub tau_syn_s: f64,
    pub max_rate_hz: [f64; 2],
    pub intercepts: [f64; 2],
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        let lif = LifParams::default();
        Self {
            n_neurons: 1000,
            learning_rate: CALIBRATED_LEARNING_RATE,
            mode: NeuronMode::Rate,
            tau_rc_s: lif.tau_rc,
            tau_ref_s: lif.tau_ref,
            tau_syn_s: 0.010,
            max_rate_hz: [100.0, 200.0],
            intercepts: [-1.0, 1.0],
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    /// Learning on in both phases.
    #[default]
    FullLearning,
    /// Learning on while training, frozen decoders during evaluation.
    FreezeAfterTraining,
    /// Evaluation only, learning on.
    NoTraining,
    /// Learning off throughout.
    LearningRateZero,
}

impl Ablation {
    pub fn learns_in_training(self) -> bool {
        self != Ablation::LearningRateZero
    }

    pub fn learns_in_evaluation(self) -> bool {
        matches!(self, Ablation::FullLearning | Ablation::NoTraining)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_targets: usize,
    pub seed: u64,
    pub training_cycles: usize,
    pub eval_trials: usize,
    pub step_limit: usize,
    pub payload_mass_kg: f64,
    /// Reach tolerance as a fraction of total arm length.
    pub tol_frac: f64,
    pub ablation: Ablation,
    pub arm: ArmConfig,
    pub controller: ControllerConfig,
    pub ensemble: EnsembleConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_targets: 6,
            seed: 1,
            training_cycles: 20,
            eval_trials: 1000,
            step_limit: 2000,
            payload_mass_kg: 1.0,
            tol_frac: 0.015,
            ablation: Ablation::FullLearning,
            arm: ArmConfig::default(),
            controller: ControllerConfig::default(),
            ensemble: EnsembleConfig::default(),
        }
    }
}

impl ScenarioConfig {
    /// The CI-sized replication scenario: 2-link arm, 1000 rate-mode
    /// neurons, 6 targets, 20 training cycles, 200 evaluation trials.
    pub fn desk_scale() -> Self {
        let mut cfg = Self {
            seed: DESK_SEED,
            eval_trials: 200,
            ..Self::default()
        };
        cfg.controller.kd_nms_per_rad = DESK_KD_NMS_PER_RAD;
        cfg.controller.velocity_bound_rad_per_s = DESK_VELOCITY_BOUND_RAD_PER_S;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_targets < 2 {
            return Err(Error::Config(format!(
                "n_targets must be at least 2 (got {})",
                self.n_targets
            )));
        }
        if self.step_limit == 0 {
            return Err(Error::Config("step_limit must be at least 1".into()));
        }
        if !(self.tol_frac > 0.0 && self.tol_frac < 1.0) {
            return Err(Error::Config(format!("tol_frac {} must be in (0, 1)", self.tol_frac)));
        }
        if !(self.payload_mass_kg >= 0.0) {
            return Err(Error::Config("payload_mass_kg must be >= 0".into()));
        }
        self.arm_model()?;
        self.gains().validate()?;
        self.normalization().validate()?;
        self.lif()?;
        PesConfig::new(self.ensemble.learning_rate, true)?;
        if self.ensemble.n_neurons == 0 {
            return Err(Error::Config("n_neurons must be at least 1".into()));
        }
        if !(self.ensemble.tau_syn_s > 0.0) {
            return Err(Error::Config("tau_syn_s must be > 0".into()));
        }
        Ok(())
    }

    pub fn arm_model(&self) -> Result<ArmModel> {
        let a = &self.arm;
        let mut model = ArmModel::uniform_rods(a.link_lengths_m.clone(), a.link_masses_kg.clone());
        if let Some(inertias) = &a.link_inertias_kg_m2 {
            model.link_inertias = inertias.clone();
        }
        model.joint_viscous_friction = a.joint_friction_nms_per_rad;
        model.gravity = a.gravity_m_per_s2;
        model.max_torque = a.max_torque_nm;
        model.dt = a.dt_s;
        model.payload_mass = self.payload_mass_kg;
        model.validate()?;
        Ok(model)
    }

    pub fn gains(&self) -> PdGains {
        PdGains {
            kp: self.controller.kp_nm_per_rad,
            kd: self.controller.kd_nms_per_rad,
        }
    }

    pub fn normalization(&self) -> Normalization {
        let c = &self.controller;
        Normalization::symmetric(
            self.arm.link_lengths_m.len(),
            c.angle_bound_rad,
            c.error_bound_rad,
            c.velocity_bound_rad_per_s,
        )
    }

    fn lif(&self) -> Result<LifParams> {
        LifParams::new(self.ensemble.tau_rc_s, self.ensemble.tau_ref_s, self.arm.dt_s)
    }

    pub fn ensemble_params(&self) -> Result<EnsembleParams> {
        let n_joints = self.arm.link_lengths_m.len();
        let e = &self.ensemble;
        Ok(EnsembleParams {
            n_neurons: e.n_neurons,
            dim_in: 2 * n_joints,
            dim_out: n_joints,
            lif: self.lif()?,
            tau_syn: e.tau_syn_s,
            mode: e.mode,
            max_rates: (e.max_rate_hz[0], e.max_rate_hz[1]),
            intercepts: (e.intercepts[0], e.intercepts[1]),
        })
    }

    /// Draws a fresh ensemble (zero decoders) and wraps it in a controller.
    pub fn build_controller<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<AdaptiveController> {
        let ensemble = Ensemble::generate(&self.ensemble_params()?, rng)?;
        AdaptiveController::new(
            self.gains(),
            ensemble,
            PesConfig::new(self.ensemble.learning_rate, true)?,
            self.controller.input_mode,
            self.normalization(),
        )
    }
}

/// Parameter grid for `sweep`. Absent lists keep the scenario's value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_neurons: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_targets: Option<Vec<usize>>,
    /// Give every cell the scenario's own seed instead of a per-cell one,
    /// so cells differ only in the swept parameters.
    pub shared_seed: bool,
}

impl SweepConfig {
    pub fn is_empty(&self) -> bool {
        self.n_neurons.is_none() && self.learning_rate.is_none() && self.n_targets.is_none()
    }

    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("n_neurons", self.n_neurons.as_ref().map(Vec::len)),
            ("learning_rate", self.learning_rate.as_ref().map(Vec::len)),
            ("n_targets", self.n_targets.as_ref().map(Vec::len)),
        ]
        .into_iter()
        .find(|(_, len)| *len == Some(0));
        match empty {
            Some((name, _)) => Err(Error::Config(format!("sweep list `{name}` is empty"))),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub seed: u64,
    pub resamples: usize,
    pub level: f64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            seed: 0x5eed,
            resamples: 10_000,
            level: 0.95,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    pub stats: StatsConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::ConfigParse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if let Some(sweep) = &self.sweep {
            sweep.validate()?;
        }
        if self.stats.resamples < 1000 {
            return Err(Error::Config("stats.resamples must be at least 1000".into()));
        }
        if !(self.stats.level > 0.0 && self.stats.level < 1.0) {
            return Err(Error::Config("stats.level must be in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config always serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn desk_scale_validates() {
        let cfg = ScenarioConfig::desk_scale();
        cfg.validate().unwrap();
        assert_eq!((cfg.n_targets, cfg.training_cycles, cfg.eval_trials), (6, 20, 200));
        assert_eq!(cfg.ensemble.n_neurons, 1000);
        assert_eq!(cfg.ensemble.mode, NeuronMode::Rate);
    }

    #[test]
    fn parses_minimal_file() {
        let cfg = RunConfig::from_toml_str(
            "[scenario]\nn_targets = 9\nseed = 3\n[scenario.ensemble]\nn_neurons = 50\n",
            Path::new("inline"),
        )
        .unwrap();
        assert_eq!(cfg.scenario.n_targets, 9);
        assert_eq!(cfg.scenario.ensemble.n_neurons, 50);
        assert_eq!(cfg.scenario.step_limit, 2000);
    }

    #[test]
    fn rejects_single_target() {
        let err = RunConfig::from_toml_str("[scenario]\nn_targets = 1\n", Path::new("x")).unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("n_targets"));
    }

    #[test]
    fn parse_errors_carry_line_context() {
        let err = RunConfig::from_toml_str("[scenario]\nn_targets = \"six\"\n", Path::new("cfg.toml"))
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("cfg.toml") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml_str("[scenario]\npayload = 1.0\n", Path::new("x")).is_err());
    }

    #[test]
    fn empty_sweep_list_is_rejected() {
        let err = RunConfig::from_toml_str("[sweep]\nn_neurons = []\n", Path::new("x")).unwrap_err();
        assert!(err.to_string().contains("n_neurons"));
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = RunConfig::default();
        cfg.sweep = Some(SweepConfig {
            learning_rate: Some(vec![1e-3, 5e-5]),
            ..Default::default()
        });
        cfg.scenario.arm.link_inertias_kg_m2 = Some(vec![0.1, 0.2]);
        let text = cfg.to_toml_string();
        assert_eq!(RunConfig::from_toml_str(&text, Path::new("x")).unwrap(), cfg);
    }
}
