use serde::{Deserialize, Serialize};

use super::ensemble::{Ensemble, EnsembleState};
use crate::error::{check_len, Error, Result};

/// Online decoder learning settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PesConfig {
    pub learning_rate: f64,
    pub enabled: bool,
}

impl Default for PesConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.0,
            enabled: true,
        }
    }
}

impl PesConfig {
    pub fn new(learning_rate: f64, enabled: bool) -> Result<Self> {
        if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {learning_rate} must be finite and >= 0"
            )));
        }
        Ok(Self {
            learning_rate,
            enabled,
        })
    }
}

impl Ensemble {
    /// Prescribed Error Sensitivity update.
    ///
    /// `decoders_i += (κ·dt / n) · filtered_activity_i · error`. Disabled
    /// configs and a zero rate leave the decoders untouched.
    pub fn apply_pes(
        &mut self,
        state: &EnsembleState,
        error: &[f64],
        cfg: &PesConfig,
    ) -> Result<()> {
        check_len("PES error", self.dim_out(), error.len())?;
        if error.iter().any(|e| !e.is_finite()) {
            return Err(Error::ContractViolation(format!(
                "PES error must be finite, got {error:?}"
            )));
        }
        check_len("ensemble state", self.n_neurons(), state.filtered_activity.len())?;
        if !cfg.enabled || cfg.learning_rate == 0.0 {
            return Ok(());
        }
        let scale = cfg.learning_rate * self.lif.dt / self.n_neurons() as f64;
        let dim_out = self.dim_out();
        for (row, a) in self
            .decoders_mut()
            .chunks_exact_mut(dim_out)
            .zip(&state.filtered_activity)
        {
            if *a == 0.0 {
                continue;
            }
            let k = scale * a;
            for (d, e) in row.iter_mut().zip(error) {
                *d += k * e;
            }
        }
        Ok(())
    }
}
