//! The distribution over clean sequences that a sampler actually produces.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ARCopulaModel, DiffusionMarginalModel};
use crate::noising::SequenceState;
use crate::sampler::{sample_many, step_distribution, SamplerConfig};
use crate::table::JointTable;

/// Largest `(C + 1)^N * T` handled by exact enumeration.
pub const EXACT_WORK_CAP: usize = 1_000_000;

/// Exact output distribution of the sampler, by pushing the state
/// distribution through every step's transition.
pub fn induced_distribution(
    dm: &DiffusionMarginalModel,
    copula: &ARCopulaModel,
    cfg: &SamplerConfig,
) -> Result<JointTable> {
    let a = dm.alphabet();
    let work = (a.num_categories() + 1)
        .checked_pow(a.num_positions() as u32)
        .and_then(|s| s.checked_mul(cfg.steps()));
    match work {
        Some(w) if w <= EXACT_WORK_CAP => {}
        _ => {
            return Err(Error::TooLarge {
                states: (a.num_categories() as u128 + 1).saturating_pow(a.num_positions() as u32),
                cap: EXACT_WORK_CAP as u64,
            })
        }
    }
    let steps = cfg.steps();
    let mut current: BTreeMap<SequenceState, f64> = BTreeMap::new();
    current.insert(
        SequenceState::all_masked(a.num_positions(), a.num_categories(), steps),
        1.0,
    );
    for t in (0..steps).rev() {
        let mut next: BTreeMap<SequenceState, f64> = BTreeMap::new();
        for (state, p) in &current {
            for (succ, q) in step_distribution(dm, copula, state, t, cfg)? {
                *next.entry(succ).or_insert(0.0) += p * q;
            }
        }
        current = next;
    }
    let mut probs = vec![0.0; a.num_states()];
    for (state, p) in current {
        if !state.is_mask_free() {
            return Err(Error::InvalidState(format!(
                "chain ended in masked state {}",
                state.render()
            )));
        }
        probs[a.index_of(&state.tokens)] += p;
    }
    JointTable::from_weights(a, probs)
}

/// Monte Carlo estimate of the output distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub table: JointTable,
    pub samples: usize,
    /// Multinomial standard error of each cell, `sqrt(p (1 - p) / n)`.
    pub std_errors: Vec<f64>,
}

impl MonteCarloEstimate {
    /// Largest cell deviation from `exact` in units of its standard error,
    /// using the exact cell probability for the error.
    pub fn max_sigma_gap(&self, exact: &JointTable) -> f64 {
        let n = self.samples as f64;
        self.table
            .probs()
            .iter()
            .zip(exact.probs())
            .map(|(&m, &p)| {
                let se = (p * (1.0 - p) / n).sqrt();
                if se > 0.0 {
                    (m - p).abs() / se
                } else if m == p {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    }
}

pub fn induced_monte_carlo(
    dm: &DiffusionMarginalModel,
    copula: &ARCopulaModel,
    cfg: &SamplerConfig,
    samples: usize,
) -> Result<MonteCarloEstimate> {
    if samples == 0 {
        return Err(Error::Config(
            "Monte Carlo needs at least one sample".into(),
        ));
    }
    let a = dm.alphabet();
    let mut counts = vec![0.0; a.num_states()];
    for seq in sample_many(dm, copula, cfg, samples)? {
        counts[a.index_of(&seq)] += 1.0;
    }
    let table = JointTable::from_weights(a, counts)?;
    let n = samples as f64;
    let std_errors = table
        .probs()
        .iter()
        .map(|&p| (p * (1.0 - p) / n).sqrt())
        .collect();
    Ok(MonteCarloEstimate {
        table,
        samples,
        std_errors,
    })
}

/// How an output distribution was obtained.
#[derive(Clone, Debug, PartialEq)]
pub enum Induced {
    Exact(JointTable),
    MonteCarlo(MonteCarloEstimate),
}

impl Induced {
    pub fn table(&self) -> &JointTable {
        match self {
            Induced::Exact(t) => t,
            Induced::MonteCarlo(e) => &e.table,
        }
    }
}

/// Exact when feasible, otherwise Monte Carlo with `fallback_samples`
/// (an error if that is `None`).
pub fn induced_auto(
    dm: &DiffusionMarginalModel,
    copula: &ARCopulaModel,
    cfg: &SamplerConfig,
    fallback_samples: Option<usize>,
) -> Result<Induced> {
    match induced_distribution(dm, copula, cfg) {
        Ok(t) => Ok(Induced::Exact(t)),
        Err(Error::TooLarge { .. }) if fallback_samples.is_some() => {
            induced_monte_carlo(dm, copula, cfg, fallback_samples.unwrap_or_default())
                .map(Induced::MonteCarlo)
        }
        Err(e) => Err(e),
    }
}
