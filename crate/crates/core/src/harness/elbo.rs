//! Evidence-bound diagnostics for factorized denoisers.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::noising::{
    brute_reverse_posterior, forward_marginal, masked_marginals, NoiseSchedule, SequenceState,
};
use crate::table::{entropy, total_correlation, JointTable, MarginalSet};

/// Every `x_t` with positive forward probability, with that probability.
fn reachable(
    data: &JointTable,
    schedule: &NoiseSchedule,
    t: usize,
) -> Result<Vec<(SequenceState, f64)>> {
    let a = data.alphabet();
    let q = forward_marginal(data, schedule, t)?;
    let masked = q.alphabet();
    Ok(q.probs()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(k, &p)| {
            (
                SequenceState {
                    tokens: masked.decode(k),
                    time: t,
                    mask: a.mask_index(),
                },
                p,
            )
        })
        .collect())
}

/// `H(data) + sum_{t=1}^T E_{x_t} TC(q(X_{t-1} | x_t))`: the negative
/// evidence bound of the best factorized denoiser.
pub fn elbo_bound(data: &JointTable, schedule: &NoiseSchedule) -> Result<f64> {
    let mut bound = entropy(data);
    for t in 1..=schedule.steps() {
        for (x_t, p) in reachable(data, schedule, t)? {
            let posterior = brute_reverse_posterior(data, &x_t, schedule, t - 1)?;
            bound += p * total_correlation(&posterior);
        }
    }
    Ok(bound)
}

/// Per-step total-correlation terms of [`elbo_bound`], for `t = 1..=T`.
pub fn tc_terms(data: &JointTable, schedule: &NoiseSchedule) -> Result<Vec<f64>> {
    (1..=schedule.steps())
        .map(|t| {
            reachable(data, schedule, t)?
                .into_iter()
                .try_fold(0.0, |acc, (x_t, p)| {
                    Ok(acc
                        + p * total_correlation(&brute_reverse_posterior(
                            data,
                            &x_t,
                            schedule,
                            t - 1,
                        )?))
                })
        })
        .collect()
}

/// Rows over `C + 1` symbols for `x_{t-1}` given `x_t` (at time `t`).
pub trait FactorizedDenoiser {
    fn rows(&self, x_t: &SequenceState, t: usize) -> Result<MarginalSet>;
}

/// The per-position marginals of the exact reverse posterior.
pub struct OptimalDenoiser<'a> {
    pub data: &'a JointTable,
    pub schedule: &'a NoiseSchedule,
}

impl FactorizedDenoiser for OptimalDenoiser<'_> {
    fn rows(&self, x_t: &SequenceState, t: usize) -> Result<MarginalSet> {
        Ok(masked_marginals(&brute_reverse_posterior(
            self.data,
            x_t,
            self.schedule,
            t - 1,
        )?))
    }
}

/// The optimal denoiser with each row blended toward a fixed noise row:
/// `(1 - weight) * optimal + weight * noise`.
pub struct PerturbedDenoiser<'a> {
    pub optimal: OptimalDenoiser<'a>,
    pub noise: Vec<Vec<f64>>,
    pub weight: f64,
}

impl FactorizedDenoiser for PerturbedDenoiser<'_> {
    fn rows(&self, x_t: &SequenceState, t: usize) -> Result<MarginalSet> {
        let base = self.optimal.rows(x_t, t)?;
        let rows = base
            .rows()
            .iter()
            .zip(&self.noise)
            .map(|(row, noise)| {
                row.iter()
                    .zip(noise)
                    .map(|(a, b)| (1.0 - self.weight) * a + self.weight * b)
                    .collect()
            })
            .collect();
        MarginalSet::new(rows, true)
    }
}

/// Forward transition `q(x_t | x_{t-1})` for chunk size one.
fn forward_step_prob(prev: &[usize], next: &[usize], mask: usize, mask_prob: f64) -> f64 {
    let mut p = 1.0;
    for (&a, &b) in prev.iter().zip(next) {
        p *= match (a == mask, b == mask) {
            (true, true) => 1.0,
            (true, false) => 0.0,
            (false, true) => mask_prob,
            (false, false) if a == b => 1.0 - mask_prob,
            (false, false) => 0.0,
        };
    }
    p
}

/// Exact negative evidence bound of a factorized denoiser:
/// `sum_t E_{q(x_{t-1}, x_t)} [-log p(x_{t-1} | x_t)] - sum_t H(X_t | X_{t-1})`.
/// The prior is the all-masked state, which costs nothing.
pub fn factorized_nelbo(
    data: &JointTable,
    schedule: &NoiseSchedule,
    denoiser: &dyn FactorizedDenoiser,
) -> Result<f64> {
    let a = data.alphabet();
    let mask = a.mask_index();
    let masked_alphabet = a.with_mask()?;
    let mut total = 0.0;
    for t in 1..=schedule.steps() {
        let prev = forward_marginal(data, schedule, t - 1)?;
        let mask_prob = schedule.step_mask_prob(t);
        let mut cache: BTreeMap<Vec<usize>, MarginalSet> = BTreeMap::new();
        for (k, &p_prev) in prev.probs().iter().enumerate() {
            if p_prev == 0.0 {
                continue;
            }
            let x_prev = masked_alphabet.decode(k);
            let unmasked: Vec<usize> = (0..a.num_positions())
                .filter(|&i| x_prev[i] != mask)
                .collect();
            for pattern in 0..(1usize << unmasked.len()) {
                let mut x_t = x_prev.clone();
                for (b, &i) in unmasked.iter().enumerate() {
                    if (pattern >> b) & 1 == 1 {
                        x_t[i] = mask;
                    }
                }
                let q_step = forward_step_prob(&x_prev, &x_t, mask, mask_prob);
                if q_step == 0.0 {
                    continue;
                }
                let joint = p_prev * q_step;
                if !cache.contains_key(&x_t) {
                    let state = SequenceState {
                        tokens: x_t.clone(),
                        time: t,
                        mask,
                    };
                    cache.insert(x_t.clone(), denoiser.rows(&state, t)?);
                }
                let rows = &cache[&x_t];
                let log_model: f64 = x_prev
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| rows.row(i)[v].ln())
                    .sum();
                if log_model == f64::NEG_INFINITY {
                    return Ok(f64::INFINITY);
                }
                total += joint * (q_step.ln() - log_model);
            }
        }
    }
    if !total.is_finite() {
        return Err(Error::Unsupported("evidence bound diverged".into()));
    }
    Ok(total)
}
