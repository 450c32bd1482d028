//! Leaky integrate-and-fire response curve and fixed-step dynamics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Membrane constants shared by every neuron of an ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifParams {
    /// Membrane time constant (s).
    pub tau_rc: f64,
    /// Refractory period (s).
    pub tau_ref: f64,
    /// Simulation timestep (s).
    pub dt: f64,
}

impl Default for LifParams {
    fn default() -> Self {
        Self {
            tau_rc: 0.020,
            tau_ref: 0.002,
            dt: 0.001,
        }
    }
}

impl LifParams {
    pub fn new(tau_rc: f64, tau_ref: f64, dt: f64) -> Result<Self> {
        let params = Self {
            tau_rc,
            tau_ref,
            dt,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.tau_rc > 0.0
            && self.tau_ref >= 0.0
            && self.dt > 0.0
            && self.dt < self.tau_rc
            && self.tau_rc.is_finite()
            && self.tau_ref.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "LIF parameters need tau_rc > 0, tau_ref >= 0 and 0 < dt < tau_rc (got {self:?})"
            )))
        }
    }

    /// Input current whose steady firing rate is `rate` Hz.
    ///
    /// Inverse of [`lif_rate`] on its increasing branch. `rate` must be
    /// below the refractory ceiling `1 / tau_ref`.
    pub fn current_for_rate(&self, rate: f64) -> f64 {
        let z = (self.tau_ref - 1.0 / rate) / self.tau_rc;
        -1.0 / z.exp_m1()
    }
}

/// Steady-state firing rate (Hz) of a LIF neuron driven by constant current `j`.
///
/// Zero at or below the unit threshold.
pub fn lif_rate(j: f64, lif: &LifParams) -> f64 {
    if j <= 1.0 {
        return 0.0;
    }
    1.0 / (lif.tau_ref - lif.tau_rc * (-1.0 / j).ln_1p())
}

/// Advances a population of LIF neurons by one `dt`.
///
/// The membrane equation is integrated exactly under a current held constant
/// over the step, and spike times are interpolated inside the step so the
/// refractory period starts at the crossing rather than at the step boundary.
/// Writes 0/1 indicators into `spiked`.
pub(crate) fn lif_step_slices(
    voltages: &mut [f64],
    refractory: &mut [f64],
    currents: &[f64],
    lif: &LifParams,
    spiked: &mut [bool],
) {
    let dt = lif.dt;
    for i in 0..voltages.len() {
        let j = currents[i];
        let remaining = refractory[i] - dt;
        let active = (dt - remaining).clamp(0.0, dt);
        let mut v = voltages[i] - (j - voltages[i]) * (-active / lif.tau_rc).exp_m1();

        if v > 1.0 {
            // time of the threshold crossing, measured from the step start
            let t_spike = dt + lif.tau_rc * (-(v - 1.0) / (j - 1.0)).ln_1p();
            spiked[i] = true;
            voltages[i] = 0.0;
            refractory[i] = lif.tau_ref + t_spike;
        } else {
            if v < 0.0 {
                v = 0.0;
            }
            spiked[i] = false;
            voltages[i] = v;
            refractory[i] = remaining.max(0.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_is_zero_at_and_below_threshold() {
        let lif = LifParams::default();
        assert_eq!(lif_rate(0.5, &lif), 0.0);
        assert_eq!(lif_rate(1.0, &lif), 0.0);
        assert_eq!(lif_rate(-3.0, &lif), 0.0);
    }

    #[test]
    fn rate_at_twice_threshold() {
        let lif = LifParams::new(0.02, 0.002, 0.001).unwrap();
        let expected = 1.0 / (0.002 + 0.02 * std::f64::consts::LN_2);
        assert!((lif_rate(2.0, &lif) - expected).abs() < 1e-9);
        assert!((lif_rate(2.0, &lif) - 63.04).abs() < 0.01);
    }

    #[test]
    fn rate_sweep_is_monotone() {
        let lif = LifParams::default();
        let mut prev = 0.0;
        for k in 0..5000 {
            let j = -1.0 + k as f64 * 0.002;
            let r = lif_rate(j, &lif);
            assert!(r >= prev, "rate decreased at j = {j}");
            prev = r;
        }
    }

    #[test]
    fn current_for_rate_inverts_rate() {
        let lif = LifParams::default();
        for rate in [10.0, 100.0, 150.0, 200.0, 400.0] {
            let j = lif.current_for_rate(rate);
            assert!((lif_rate(j, &lif) - rate).abs() < 1e-9 * rate);
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(LifParams::new(0.0, 0.002, 0.001).is_err());
        assert!(LifParams::new(0.02, -0.1, 0.001).is_err());
        assert!(LifParams::new(0.02, 0.002, 0.05).is_err());
    }
}
