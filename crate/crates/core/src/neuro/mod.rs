//! LIF neuron ensembles: encoding, spiking and rate dynamics, synaptic
//! filtering, least-squares decoders and the PES learning rule.

mod decoders;
mod ensemble;
mod lif;
mod pes;

pub use decoders::{solve_decoders, DEFAULT_REG};
pub use ensemble::{Ensemble, EnsembleParams, EnsembleState, NeuronMode};
pub use lif::{lif_rate, LifParams};
pub use pes::PesConfig;
