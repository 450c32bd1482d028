use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::lif::{lif_rate, lif_step_slices, LifParams};
use crate::error::{check_len, Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeuronMode {
    Spiking,
    #[default]
    Rate,
}

/// Recipe for drawing a random ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub n_neurons: usize,
    pub dim_in: usize,
    pub dim_out: usize,
    pub lif: LifParams,
    /// Synaptic lowpass time constant (s).
    pub tau_syn: f64,
    pub mode: NeuronMode,
    /// Per-neuron maximum firing rate is drawn uniformly from this range (Hz).
    pub max_rates: (f64, f64),
    /// Per-neuron intercept is drawn uniformly from this open range.
    pub intercepts: (f64, f64),
}

impl EnsembleParams {
    pub fn new(n_neurons: usize, dim_in: usize, dim_out: usize) -> Self {
        Self {
            n_neurons,
            dim_in,
            dim_out,
            lif: LifParams::default(),
            tau_syn: 0.010,
            mode: NeuronMode::Rate,
            max_rates: (100.0, 200.0),
            intercepts: (-1.0, 1.0),
        }
    }
}

/// A population of LIF neurons with encoders, gains, biases and a learnable
/// linear readout.
///
/// Matrices are stored row-major with one row per neuron.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    n_neurons: usize,
    dim_in: usize,
    dim_out: usize,
    encoders: Vec<f64>,
    gains: Vec<f64>,
    biases: Vec<f64>,
    decoders: Vec<f64>,
    pub lif: LifParams,
    pub tau_syn: f64,
    pub mode: NeuronMode,
}

impl Ensemble {
    /// Draws encoders uniformly on the unit hypersphere and derives gains and
    /// biases from uniformly drawn maximum rates and intercepts. Decoders
    /// start at zero.
    pub fn generate<R: Rng + ?Sized>(params: &EnsembleParams, rng: &mut R) -> Result<Self> {
        params.lif.validate()?;
        if params.n_neurons == 0 || params.dim_in == 0 || params.dim_out == 0 {
            return Err(Error::Config(
                "ensemble needs at least one neuron and non-empty input/output spaces".into(),
            ));
        }
        let (rate_lo, rate_hi) = params.max_rates;
        if !(rate_lo > 0.0 && rate_lo <= rate_hi && rate_hi * params.lif.tau_ref < 1.0) {
            return Err(Error::Config(format!(
                "max rates {:?} must be positive and below the refractory ceiling",
                params.max_rates
            )));
        }
        let (ic_lo, ic_hi) = params.intercepts;
        if !(ic_lo <= ic_hi && ic_lo >= -1.0 && ic_hi <= 1.0) {
            return Err(Error::Config(format!(
                "intercepts {:?} must lie in [-1, 1]",
                params.intercepts
            )));
        }

        let n = params.n_neurons;
        let d = params.dim_in;
        let mut encoders = Vec::with_capacity(n * d);
        let mut gains = Vec::with_capacity(n);
        let mut biases = Vec::with_capacity(n);
        let mut row = vec![0.0; d];
        for _ in 0..n {
            loop {
                for v in row.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 1e-9 {
                    encoders.extend(row.iter().map(|v| v / norm));
                    break;
                }
            }
            let max_rate = uniform(rng, rate_lo, rate_hi);
            let intercept = uniform(rng, ic_lo, ic_hi);
            // j(intercept) = 1 and j(1) = current needed for max_rate
            let j_max = params.lif.current_for_rate(max_rate);
            let gain = (j_max - 1.0) / (1.0 - intercept);
            gains.push(gain);
            biases.push(1.0 - gain * intercept);
        }

        Ok(Self {
            n_neurons: n,
            dim_in: d,
            dim_out: params.dim_out,
            encoders,
            gains,
            biases,
            decoders: vec![0.0; n * params.dim_out],
            lif: params.lif,
            tau_syn: params.tau_syn,
            mode: params.mode,
        })
    }

    /// Builds an ensemble from explicit parameters. `encoders` is row-major
    /// `n × dim_in` and every row must have unit norm.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        encoders: Vec<f64>,
        gains: Vec<f64>,
        biases: Vec<f64>,
        dim_in: usize,
        dim_out: usize,
        lif: LifParams,
        tau_syn: f64,
        mode: NeuronMode,
    ) -> Result<Self> {
        lif.validate()?;
        let n = gains.len();
        if n == 0 || dim_in == 0 || dim_out == 0 {
            return Err(Error::ContractViolation("empty ensemble".into()));
        }
        check_len("biases", n, biases.len())?;
        check_len("encoders", n * dim_in, encoders.len())?;
        for (i, row) in encoders.chunks(dim_in).enumerate() {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::ContractViolation(format!(
                    "encoder {i} has norm {norm}, expected 1"
                )));
            }
        }
        if let Some(g) = gains.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(Error::ContractViolation(format!("gain {g} is not positive")));
        }
        if !(tau_syn > 0.0) {
            return Err(Error::ContractViolation("tau_syn must be positive".into()));
        }
        Ok(Self {
            n_neurons: n,
            dim_in,
            dim_out,
            encoders,
            gains,
            biases,
            decoders: vec![0.0; n * dim_out],
            lif,
            tau_syn,
            mode,
        })
    }

    pub fn n_neurons(&self) -> usize {
        self.n_neurons
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn encoders(&self) -> &[f64] {
        &self.encoders
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    /// Row-major `n_neurons × dim_out` readout weights.
    pub fn decoders(&self) -> &[f64] {
        &self.decoders
    }

    pub(crate) fn decoders_mut(&mut self) -> &mut [f64] {
        &mut self.decoders
    }

    pub fn set_decoders(&mut self, decoders: Vec<f64>) -> Result<()> {
        check_len("decoders", self.n_neurons * self.dim_out, decoders.len())?;
        if decoders.iter().any(|d| !d.is_finite()) {
            return Err(Error::ContractViolation("decoders must be finite".into()));
        }
        self.decoders = decoders;
        Ok(())
    }

    /// Input currents `gain_i * <encoder_i, x> + bias_i`.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n_neurons];
        self.encode_into(x, &mut out)?;
        Ok(out)
    }

    pub(crate) fn encode_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("ensemble input", self.dim_in, x.len())?;
        for ((row, (g, b)), j) in self
            .encoders
            .chunks_exact(self.dim_in)
            .zip(self.gains.iter().zip(&self.biases))
            .zip(out.iter_mut())
        {
            let dot: f64 = row.iter().zip(x).map(|(e, v)| e * v).sum();
            *j = g * dot + b;
        }
        Ok(())
    }

    /// Steady-state firing rates at input `x`.
    pub fn rates(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut j = self.encode(x)?;
        for v in j.iter_mut() {
            *v = lif_rate(*v, &self.lif);
        }
        Ok(j)
    }

    /// `decodersᵀ · activity`.
    pub fn decode(&self, activity: &[f64]) -> Result<Vec<f64>> {
        check_len("activity", self.n_neurons, activity.len())?;
        let mut out = vec![0.0; self.dim_out];
        decode_into(&self.decoders, self.dim_out, activity, &mut out);
        Ok(out)
    }

    pub fn new_state(&self) -> EnsembleState {
        EnsembleState {
            voltages: vec![0.0; self.n_neurons],
            refractory_remaining: vec![0.0; self.n_neurons],
            filtered_activity: vec![0.0; self.n_neurons],
            filtered_output: vec![0.0; self.dim_out],
            currents: vec![0.0; self.n_neurons],
            spiked: vec![false; self.n_neurons],
        }
    }

    /// Advances the ensemble one timestep with input `x` and returns the
    /// synapse-filtered decoded output.
    pub fn step<'s>(&self, state: &'s mut EnsembleState, x: &[f64]) -> Result<&'s [f64]> {
        check_len("ensemble state", self.n_neurons, state.voltages.len())?;
        check_len("ensemble state output", self.dim_out, state.filtered_output.len())?;
        self.encode_into(x, &mut state.currents)?;
        let alpha = -(-self.lif.dt / self.tau_syn).exp_m1();
        match self.mode {
            NeuronMode::Spiking => {
                lif_step_slices(
                    &mut state.voltages,
                    &mut state.refractory_remaining,
                    &state.currents,
                    &self.lif,
                    &mut state.spiked,
                );
                let amplitude = 1.0 / self.lif.dt;
                for (a, s) in state.filtered_activity.iter_mut().zip(&state.spiked) {
                    let drive = if *s { amplitude } else { 0.0 };
                    *a += (drive - *a) * alpha;
                }
            }
            NeuronMode::Rate => {
                for (a, j) in state.filtered_activity.iter_mut().zip(&state.currents) {
                    *a += (lif_rate(*j, &self.lif) - *a) * alpha;
                }
            }
        }
        decode_into(
            &self.decoders,
            self.dim_out,
            &state.filtered_activity,
            &mut state.filtered_output,
        );
        Ok(&state.filtered_output)
    }
}

/// Per-neuron dynamic state of an [`Ensemble`].
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleState {
    /// Normalized membrane potentials in `[0, 1]`.
    pub voltages: Vec<f64>,
    /// Refractory time still to serve (s), counted from the start of the
    /// previous step.
    pub refractory_remaining: Vec<f64>,
    /// Lowpass-filtered activity (Hz).
    pub filtered_activity: Vec<f64>,
    pub filtered_output: Vec<f64>,
    currents: Vec<f64>,
    spiked: Vec<bool>,
}

impl EnsembleState {
    /// Advances the membrane state under `currents` and returns which
    /// neurons spiked.
    pub fn lif_step(&mut self, currents: &[f64], lif: &LifParams) -> Result<&[bool]> {
        check_len("currents", self.voltages.len(), currents.len())?;
        lif_step_slices(
            &mut self.voltages,
            &mut self.refractory_remaining,
            currents,
            lif,
            &mut self.spiked,
        );
        Ok(&self.spiked)
    }

    /// Spike indicators from the most recent step.
    pub fn spikes(&self) -> &[bool] {
        &self.spiked
    }
}

fn decode_into(decoders: &[f64], dim_out: usize, activity: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (row, a) in decoders.chunks_exact(dim_out).zip(activity) {
        if *a == 0.0 {
            continue;
        }
        for (o, d) in out.iter_mut().zip(row) {
            *o += d * a;
        }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        lo + (hi - lo) * rng.random::<f64>()
    } else {
        lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn three_neurons() -> Ensemble {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Ensemble::from_parts(
            vec![1.0, 0.0, 0.0, 1.0, s, -s],
            vec![1.0, 2.0, 0.5],
            vec![0.0, 1.5, -0.25],
            2,
            1,
            LifParams::default(),
            0.01,
            NeuronMode::Rate,
        )
        .unwrap()
    }

    #[test]
    fn zero_input_gives_biases() {
        let ens = three_neurons();
        assert_eq!(ens.encode(&[0.0, 0.0]).unwrap(), vec![0.0, 1.5, -0.25]);
    }

    #[test]
    fn aligned_unit_input_gives_unit_current() {
        let ens = three_neurons();
        assert_eq!(ens.encode(&[1.0, 0.0]).unwrap()[0], 1.0);
    }

    #[test]
    fn hand_computed_currents() {
        let ens = three_neurons();
        let j = ens.encode(&[0.3, -0.8]).unwrap();
        // 1·0.3 + 0 ; 2·(-0.8) + 1.5 ; 0.5·(0.3+0.8)/√2 − 0.25
        let expected = [0.3, -0.1, 0.5 * 1.1 / 2f64.sqrt() - 0.25];
        for (a, b) in j.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn encode_rejects_wrong_dimension() {
        let ens = three_neurons();
        assert!(matches!(
            ens.encode(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn from_parts_rejects_non_unit_encoder() {
        let err = Ensemble::from_parts(
            vec![2.0],
            vec![1.0],
            vec![0.0],
            1,
            1,
            LifParams::default(),
            0.01,
            NeuronMode::Rate,
        );
        assert!(err.is_err());
    }

    #[test]
    fn generated_ensemble_respects_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ens = Ensemble::generate(&EnsembleParams::new(200, 4, 2), &mut rng).unwrap();
        for row in ens.encoders().chunks(4) {
            let n: f64 = row.iter().map(|v| v * v).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
        assert!(ens.gains().iter().all(|g| *g > 0.0));
        assert!(ens.decoders().iter().all(|d| *d == 0.0));
    }

    #[test]
    fn generated_rates_hit_intercept_and_max_rate() {
        // an encoder-aligned input of norm 1 must produce the drawn max rate
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ens = Ensemble::generate(&EnsembleParams::new(50, 1, 1), &mut rng).unwrap();
        let up = ens.rates(&[1.0]).unwrap();
        let down = ens.rates(&[-1.0]).unwrap();
        for i in 0..50 {
            let peak = if ens.encoders()[i] > 0.0 { up[i] } else { down[i] };
            assert!((100.0 - 1e-6..=200.0 + 1e-6).contains(&peak), "{peak}");
        }
    }

    #[test]
    fn zero_decoders_decode_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut params = EnsembleParams::new(64, 2, 3);
        params.mode = NeuronMode::Spiking;
        let ens = Ensemble::generate(&params, &mut rng).unwrap();
        let mut state = ens.new_state();
        for k in 0..200 {
            let x = [(k as f64 * 0.1).sin(), 0.4];
            assert_eq!(ens.step(&mut state, &x).unwrap(), &[0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn voltages_stay_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut params = EnsembleParams::new(100, 1, 1);
        params.mode = NeuronMode::Spiking;
        let ens = Ensemble::generate(&params, &mut rng).unwrap();
        let mut state = ens.new_state();
        for k in 0..2000 {
            ens.step(&mut state, &[(k as f64 * 0.01).sin()]).unwrap();
            assert!(state.voltages.iter().all(|v| (0.0..=1.0).contains(v)));
            assert!(state.refractory_remaining.iter().all(|r| *r >= 0.0));
        }
    }

    #[test]
    fn no_drive_means_no_spikes() {
        let lif = LifParams::default();
        let ens = three_neurons();
        let mut state = ens.new_state();
        state.voltages = vec![0.5; 3];
        let mut total = 0;
        for _ in 0..1000 {
            total += state
                .lif_step(&[0.0; 3], &lif)
                .unwrap()
                .iter()
                .filter(|s| **s)
                .count();
        }
        assert_eq!(total, 0);
        assert!(state.voltages.iter().all(|v| *v < 1e-20));
    }
}
