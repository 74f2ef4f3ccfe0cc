//! TOML run configuration. Every section is optional; unknown keys are
//! rejected.
//!
//! ```toml
//! seed = 7
//!
//! [data]
//! kind = "correlated_phrases"
//! N = 3
//! C = 2
//! correlation_strength = 0.8
//!
//! [schedule]
//! family = "log-linear"
//! T = 4
//!
//! [models]
//! diffusion = "exact"
//! copula = "counts"
//! corpus_size = 5000
//!
//! [sampler]
//! mode = "dcd"
//! beta = 1.0
//!
//! [sweep]
//! modes = ["dcd", "diffusion_only"]
//! T = [1, 2, 4]
//! beta = [0.1, 1.0]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::synth::{SyntheticKind, SyntheticSpec};
use crate::models::{ModelKind, DEFAULT_SMOOTHING};
use crate::noising::{ScheduleFamily, ScheduleSpec, DEFAULT_EPSILON};
use crate::sampler::Mode;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub models: ModelSection,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub kind: SyntheticKind,
    #[serde(rename = "N")]
    pub num_positions: usize,
    #[serde(rename = "C")]
    pub num_categories: usize,
    pub correlation_strength: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            kind: SyntheticKind::CorrelatedPhrases,
            num_positions: 3,
            num_categories: 2,
            correlation_strength: 0.8,
        }
    }
}

impl DataSection {
    pub fn spec(&self, seed: u64) -> SyntheticSpec {
        SyntheticSpec::new(
            self.kind,
            self.num_positions,
            self.num_categories,
            self.correlation_strength,
            seed,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSection {
    pub family: ScheduleFamily,
    #[serde(rename = "T")]
    pub steps: usize,
    pub epsilon: f64,
    pub chunk_size: usize,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self {
            family: ScheduleFamily::LogLinear,
            steps: 4,
            epsilon: DEFAULT_EPSILON,
            chunk_size: 1,
        }
    }
}

impl ScheduleSection {
    pub fn spec(&self) -> ScheduleSpec {
        ScheduleSpec {
            family: self.family,
            steps: self.steps,
            epsilon: self.epsilon,
            chunk_size: self.chunk_size,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// Backing of the diffusion-marginal model.
    pub diffusion: ModelKind,
    /// Backing of the autoregressive copula model.
    pub copula: ModelKind,
    pub smoothing: f64,
    /// Sequences drawn from the data table to fit count-backed models.
    pub corpus_size: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            diffusion: ModelKind::Exact,
            copula: ModelKind::Exact,
            smoothing: DEFAULT_SMOOTHING,
            corpus_size: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    pub mode: Mode,
    pub beta: f64,
    pub samples: usize,
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self {
            mode: Mode::Dcd,
            beta: 1.0,
            samples: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub modes: Vec<Mode>,
    #[serde(rename = "T")]
    pub steps: Vec<usize>,
    pub beta: Vec<f64>,
    pub timing: bool,
    pub mc_samples: Option<usize>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            modes: vec![
                Mode::Dcd,
                Mode::DiffusionOnly,
                Mode::ArOnly,
                Mode::DcdArUnmask,
            ],
            steps: vec![1, 2, 4],
            beta: vec![1.0],
            timing: false,
            mc_samples: None,
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        assert_eq!(Config::parse("").unwrap(), Config::default());
    }

    #[test]
    fn sections_parse() {
        let cfg = Config::parse(
            "seed = 3\n[data]\nkind = \"markov_chain\"\nN = 4\n[schedule]\nT = 2\nfamily = \"linear\"\n[sweep]\nmodes = [\"ar_only\"]\nbeta = [0.1, 1.0]\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, Some(3));
        assert_eq!(cfg.data.kind, SyntheticKind::MarkovChain);
        assert_eq!(cfg.data.num_positions, 4);
        assert_eq!(cfg.schedule.steps, 2);
        assert_eq!(cfg.sweep.modes, vec![Mode::ArOnly]);
        assert_eq!(cfg.sweep.beta, vec![0.1, 1.0]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            Config::parse("[data]\nflavour = 1\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(Config::parse("[extras]\n"), Err(Error::Config(_))));
    }
}
