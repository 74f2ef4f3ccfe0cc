//! Experiment harness: synthetic data, exact evaluation of samplers,
//! evidence-bound diagnostics, sweeps, self-verification and the CLI.

pub mod cli;
pub mod config;
pub mod elbo;
pub mod induced;
pub mod sweep;
pub mod synth;
pub mod verify;

pub use elbo::{
    elbo_bound, factorized_nelbo, FactorizedDenoiser, OptimalDenoiser, PerturbedDenoiser,
};
pub use induced::{
    induced_auto, induced_distribution, induced_monte_carlo, Induced, MonteCarloEstimate,
};
pub use sweep::{run_sweep, to_csv, ExperimentResult, SweepOptions};
pub use synth::{gen_data, SyntheticKind, SyntheticSpec};
