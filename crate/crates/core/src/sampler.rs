//! Reverse-process samplers: the fused copula sampler, its left-to-right
//! unmasking variant, and the two baselines.
//!
//! Every step draws an auxiliary sequence for some masked positions and
//! then decides which of them to reveal. The same per-position conditionals
//! drive both random draws ([`sample`]) and exact enumeration of the step's
//! transition distribution ([`step_distribution`]).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iproj::{dcd_factors, FactorMatrix};
use crate::models::{ARCopulaModel, DiffusionMarginalModel};
use crate::noising::{AuxSequence, NoiseSchedule, RemaskKernel, SequenceState};
use crate::numeric::{normalize, sample_categorical};
use crate::table::MarginalSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Dcd,
    DiffusionOnly,
    ArOnly,
    DcdArUnmask,
}

impl Mode {
    pub const ALL: [Mode; 4] = [
        Mode::Dcd,
        Mode::DiffusionOnly,
        Mode::ArOnly,
        Mode::DcdArUnmask,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Dcd => "dcd",
            Mode::DiffusionOnly => "diffusion_only",
            Mode::ArOnly => "ar_only",
            Mode::DcdArUnmask => "dcd_ar_unmask",
        }
    }

    /// Reveal policy a mode uses unless configured otherwise.
    pub fn default_reveal(self) -> Reveal {
        match self {
            Mode::Dcd | Mode::DiffusionOnly => Reveal::Remask,
            Mode::ArOnly | Mode::DcdArUnmask => Reveal::LeftToRight,
        }
    }

    fn uses_factors(self) -> bool {
        matches!(self, Mode::Dcd | Mode::DcdArUnmask)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode {s:?}")))
    }
}

/// Which positions a step reveals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reveal {
    /// Sample every masked position, then re-mask with the reverse kernel.
    Remask,
    /// Reveal positions in order, up to the boundary of [`ar_unmask_schedule`].
    LeftToRight,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub schedule: NoiseSchedule,
    pub beta: f64,
    pub mode: Mode,
    pub reveal: Reveal,
    pub chunk_size: usize,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(mode: Mode, schedule: NoiseSchedule, beta: f64, seed: u64) -> Self {
        Self {
            schedule,
            beta,
            mode,
            reveal: mode.default_reveal(),
            chunk_size: 1,
            seed,
        }
    }

    pub fn with_reveal(mut self, reveal: Reveal) -> Self {
        self.reveal = reveal;
        self
    }

    pub fn with_chunk_size(mut self, chunk_size: usize) -> Self {
        self.chunk_size = chunk_size;
        self
    }

    pub fn steps(&self) -> usize {
        self.schedule.steps()
    }

    /// The reveal policy actually used; AR-style modes are always
    /// left-to-right.
    pub fn effective_reveal(&self) -> Reveal {
        match self.mode {
            Mode::ArOnly | Mode::DcdArUnmask => Reveal::LeftToRight,
            _ => self.reveal,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::Config(format!(
                "beta must be finite and nonnegative, got {}",
                self.beta
            )));
        }
        if self.chunk_size == 0 {
            return Err(Error::Config("chunk_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Number of leading positions revealed once `x_t` is reached, for
/// `t = T-1, ..., 0`: `ceil(N (T - t) / T)`.
pub fn ar_unmask_schedule(num_positions: usize, steps: usize) -> Vec<usize> {
    (0..steps)
        .rev()
        .map(|t| unmask_boundary(num_positions, steps, t))
        .collect()
}

fn unmask_boundary(n: usize, steps: usize, t: usize) -> usize {
    (n * (steps - t)).div_ceil(steps)
}

/// Per-step record kept by [`sample`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleTrace {
    /// `x_T, x_{T-1}, ..., x_0`.
    pub states: Vec<SequenceState>,
    /// Fused factors per step, for modes that compute them.
    pub factor_matrices: Vec<Option<FactorMatrix>>,
    /// Full-context diffusion marginals per step, when queried.
    pub marginals: Vec<Option<MarginalSet>>,
    /// Autoregressive conditionals evaluated over the whole run.
    pub copula_queries: usize,
}

impl SampleTrace {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Everything one step needs, computed once per `x_{t+1}`.
struct StepPlan<'a> {
    x_next: &'a SequenceState,
    /// Positions to draw, ascending.
    targets: Vec<usize>,
    /// Data-only full-context rows, used directly by the diffusion baseline.
    full: Option<MarginalSet>,
    factors: Option<FactorMatrix>,
}

fn check_models(
    dm: &DiffusionMarginalModel,
    copula: &ARCopulaModel,
    cfg: &SamplerConfig,
) -> Result<()> {
    if dm.alphabet() != copula.alphabet() {
        return Err(Error::ShapeMismatch(
            "diffusion and copula models use different alphabets".into(),
        ));
    }
    if dm.schedule().steps() != cfg.steps() {
        return Err(Error::Config(
            "model schedule and sampler schedule differ in T".into(),
        ));
    }
    cfg.validate()
}

fn plan<'a>(
    dm: &DiffusionMarginalModel,
    x_next: &'a SequenceState,
    t: usize,
    cfg: &SamplerConfig,
) -> Result<StepPlan<'a>> {
    let n = x_next.num_positions();
    let limit = match cfg.effective_reveal() {
        Reveal::Remask => n,
        Reveal::LeftToRight => unmask_boundary(n, cfg.steps(), t),
    };
    let targets: Vec<usize> = (0..limit).filter(|&i| x_next.is_masked(i)).collect();
    let (full, factors) = match cfg.mode {
        Mode::ArOnly => (None, None),
        Mode::DiffusionOnly => (Some(dm.marginals_full(x_next, t)?), None),
        Mode::Dcd | Mode::DcdArUnmask => {
            let full = dm.marginals_full(x_next, t)?;
            let causal = dm.marginals_causal(x_next, t)?;
            let factors = dcd_factors(&full, &causal, cfg.beta.max(f64::MIN_POSITIVE))?;
            (Some(full), Some(factors))
        }
    };
    Ok(StepPlan {
        x_next,
        targets,
        full,
        factors,
    })
}

impl StepPlan<'_> {
    /// Distribution of target position `i` given the tokens already fixed
    /// at positions `< i` in `tokens`.
    fn conditional(
        &self,
        copula: &ARCopulaModel,
        cfg: &SamplerConfig,
        tokens: &[usize],
        i: usize,
    ) -> Result<Vec<f64>> {
        if cfg.mode == Mode::DiffusionOnly {
            return Ok(self
                .full
                .as_ref()
                .expect("baseline plan has marginals")
                .row(i)
                .to_vec());
        }
        let mut probs = copula.copula_conditional(self.x_next, &tokens[..i])?;
        if let Some(v) = self
            .factors
            .as_ref()
            .filter(|_| cfg.mode.uses_factors() && cfg.beta > 0.0)
        {
            for (c, p) in probs.iter_mut().enumerate() {
                *p *= (cfg.beta * v.row(i)[c]).exp();
            }
        }
        if !(normalize(&mut probs) > 0.0) {
            return Err(Error::ZeroEvidence);
        }
        Ok(probs)
    }

    /// Tokens with clamped positions filled and targets set to 0.
    fn base_tokens(&self) -> Vec<usize> {
        self.x_next
            .tokens
            .iter()
            .map(|&t| if t == self.x_next.mask { 0 } else { t })
            .collect()
    }

    /// The next state given values for every target.
    fn finish(
        &self,
        tokens: &[usize],
        t: usize,
        cfg: &SamplerConfig,
    ) -> Result<Vec<(SequenceState, f64)>> {
        match cfg.effective_reveal() {
            Reveal::LeftToRight => {
                let mut next = self.x_next.clone();
                for &i in &self.targets {
                    next.tokens[i] = tokens[i];
                }
                next.time = t;
                Ok(vec![(next, 1.0)])
            }
            Reveal::Remask => {
                let aux = AuxSequence {
                    tokens: tokens.to_vec(),
                    time: t,
                };
                let kernel =
                    RemaskKernel::new(&aux, self.x_next, &cfg.schedule, t, cfg.chunk_size)?;
                Ok(kernel.support())
            }
        }
    }
}

/// Exact distribution of `x_t` given `x_{t+1}` under `cfg.mode`, as a list
/// of distinct states with positive probability.
pub fn step_distribution(
    dm: &DiffusionMarginalModel,
    copula: &ARCopulaModel,
    x_next: &SequenceState,
    t: usize,
    cfg: &SamplerConfig,
) -> Result<Vec<(SequenceState, f64)>> {
    check_models(dm, copula, cfg)?;
    let plan = plan(dm, x_next, t, cfg)?;
    let mut out: BTreeMap<SequenceState, f64> = BTreeMap::new();
    let mut tokens = plan.base_tokens();
    enumerate_targets(&plan, copula, cfg, 0, 1.0, &mut tokens, &mut |tokens, p| {
        for (state, q) in plan.finish(tokens, t, cfg)? {
            *out.entry(state).or_insert(0.0) += p * q;
        }
        Ok(())
    })?;
    Ok(out.into_iter().collect())
}

fn enumerate_targets(
    plan: &StepPlan<'_>,
    copula: &ARCopulaModel,
    cfg: &SamplerConfig,
    k: usize,
    mass: f64,
    tokens: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize], f64) -> Result<()>,
) -> Result<()> {
    let Some(&i) = plan.targets.get(k) else {
        return visit(tokens, mass);
    };
    let probs = plan.conditional(copula, cfg, tokens, i)?;
    for (c, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            tokens[i] = c;
            enumerate_targets(plan, copula, cfg, k + 1, mass * p, tokens, visit)?;
        }
    }
    tokens[i] = 0;
    Ok(())
}

/// What one sampled step produced.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput {
    pub state: SequenceState,
    pub factors: Option<FactorMatrix>,
    pub marginals: Option<MarginalSet>,
    pub copula_queries: usize,
}

/// One reverse step from `x_{t+1}` to `x_t` for any mode.
pub fn step<R: Rng + ?Sized>(
    dm: &DiffusionMarginalModel,
    copula: &ARCopulaModel,
    x_next: &SequenceState,
    t: usize,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<StepOutput> {
    check_models(dm, copula, cfg)?;
    let plan = plan(dm, x_next, t, cfg)?;
    let mut tokens = plan.base_tokens();
    for &i in &plan.targets {
        let probs = plan.conditional(copula, cfg, &tokens, i)?;
        tokens[i] = sample_categorical(rng, &probs);
    }
    let copula_queries = if cfg.mode == Mode::DiffusionOnly {
        0
    } else {
        plan.targets.len()
    };
    let state = match cfg.effective_reveal() {
        Reveal::LeftToRight => plan.finish(&tokens, t, cfg)?.remove(0).0,
        Reveal::Remask => {
            let aux = AuxSequence { tokens, time: t };
            RemaskKernel::new(&aux, x_next, &cfg.schedule, t, cfg.chunk_size)?.sample(rng)
        }
    };
    Ok(StepOutput {
        state,
        factors: plan.factors,
        marginals: plan.full,
        copula_queries,
    })
}

/// The fused step: factors from full and causal diffusion marginals, a
/// left-to-right draw from `copula * exp(beta V)` with clamps, then the
/// reveal policy of `cfg`.
pub fn dcd_step<R: Rng + ?Sized>(
    dm: &DiffusionMarginalModel,
    copula: &ARCopulaModel,
    x_next: &SequenceState,
    t: usize,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<StepOutput> {
    if !cfg.mode.uses_factors() {
        return Err(Error::Config(format!(
            "dcd_step called with mode {}",
            cfg.mode
        )));
    }
    step(dm, copula, x_next, t, cfg, rng)
}

/// Baseline step: each masked position drawn independently from its
/// full-context diffusion marginal.
pub fn diffusion_only_step<R: Rng + ?Sized>(
    dm: &DiffusionMarginalModel,
    copula: &ARCopulaModel,
    x_next: &SequenceState,
    t: usize,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<SequenceState> {
    let cfg = SamplerConfig {
        mode: Mode::DiffusionOnly,
        ..cfg.clone()
    };
    Ok(step(dm, copula, x_next, t, &cfg, rng)?.state)
}

/// Runs the chain from the all-masked prior at `T` down to `t = 0` with an
/// RNG seeded from `cfg.seed`.
pub fn sample(
    dm: &DiffusionMarginalModel,
    copula: &ARCopulaModel,
    cfg: &SamplerConfig,
) -> Result<(SequenceState, SampleTrace)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    sample_with_rng(dm, copula, cfg, &mut rng)
}

pub fn sample_with_rng<R: Rng + ?Sized>(
    dm: &DiffusionMarginalModel,
    copula: &ARCopulaModel,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<(SequenceState, SampleTrace)> {
    check_models(dm, copula, cfg)?;
    let a = dm.alphabet();
    let steps = cfg.steps();
    let mut state = SequenceState::all_masked(a.num_positions(), a.num_categories(), steps);
    let mut trace = SampleTrace {
        states: vec![state.clone()],
        ..Default::default()
    };
    for t in (0..steps).rev() {
        let out = step(dm, copula, &state, t, cfg, rng)?;
        trace.factor_matrices.push(out.factors);
        trace.marginals.push(out.marginals);
        trace.copula_queries += out.copula_queries;
        state = out.state;
        trace.states.push(state.clone());
    }
    debug_assert!(state.is_mask_free());
    Ok((state, trace))
}

/// `count` independent samples sharing one seeded stream.
pub fn sample_many(
    dm: &DiffusionMarginalModel,
    copula: &ARCopulaModel,
    cfg: &SamplerConfig,
    count: usize,
) -> Result<Vec<Vec<usize>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..count)
        .map(|_| sample_with_rng(dm, copula, cfg, &mut rng).map(|(s, _)| s.tokens))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noising::{make_schedule, ScheduleFamily};
    use crate::table::{Alphabet, JointTable};

    fn pair() -> JointTable {
        JointTable::from_weights(Alphabet::new(2, 2).unwrap(), vec![0.45, 0.05, 0.05, 0.45])
            .unwrap()
    }

    fn models(data: &JointTable, steps: usize) -> (DiffusionMarginalModel, ARCopulaModel) {
        let sched = make_schedule(ScheduleFamily::Linear, steps, 0.0).unwrap();
        (
            DiffusionMarginalModel::exact(data, sched),
            ARCopulaModel::exact(data),
        )
    }

    #[test]
    fn unmask_boundaries() {
        assert_eq!(ar_unmask_schedule(10, 4), vec![3, 5, 8, 10]);
        assert_eq!(ar_unmask_schedule(3, 3), vec![1, 2, 3]);
        assert_eq!(ar_unmask_schedule(5, 1), vec![5]);
    }

    #[test]
    fn mode_names_roundtrip() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert!("sedd".parse::<Mode>().is_err());
    }

    #[test]
    fn samples_end_mask_free() {
        let data = pair();
        for mode in Mode::ALL {
            let (dm, ar) = models(&data, 3);
            let cfg = SamplerConfig::new(mode, dm.schedule().clone(), 1.0, 7);
            let (x0, trace) = sample(&dm, &ar, &cfg).unwrap();
            assert!(x0.is_mask_free());
            assert_eq!(x0.time, 0);
            assert_eq!(trace.states.len(), 4);
        }
    }

    #[test]
    fn step_distribution_sums_to_one() {
        let data = pair();
        let (dm, ar) = models(&data, 2);
        let x = SequenceState::new(vec![2, 1], 2, 2).unwrap();
        for mode in Mode::ALL {
            let cfg = SamplerConfig::new(mode, dm.schedule().clone(), 1.0, 0);
            let total: f64 = step_distribution(&dm, &ar, &x, 1, &cfg)
                .unwrap()
                .iter()
                .map(|(_, p)| p)
                .sum();
            assert!((total - 1.0).abs() < 1e-12, "{mode}");
        }
    }

    #[test]
    fn fully_unmasked_context_is_copied() {
        let data = pair();
        let (dm, ar) = models(&data, 2);
        let x = SequenceState::new(vec![1, 0], 1, 2).unwrap();
        let cfg = SamplerConfig::new(Mode::Dcd, dm.schedule().clone(), 1.0, 0);
        let out = dcd_step(&dm, &ar, &x, 0, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(out.state.tokens, vec![1, 0]);
        assert_eq!(out.copula_queries, 0);
    }
}
