//! The absorbing-mask forward process and its exact reverse kernels.
//!
//! Each data token is independently replaced by the mask symbol (index `C`)
//! with cumulative probability `alpha_t`, where `0 = alpha_0 < alpha_1 < ...
//! < alpha_T = 1`. Reversing one step splits into two pieces:
//!
//! * an auxiliary, mask-free sequence drawn from the data distribution
//!   conditioned on the currently unmasked tokens ([`aux_posterior`]);
//! * a factorized re-masking of the positions that were masked, each kept
//!   masked with probability `alpha_t / alpha_{t+1}` ([`RemaskKernel`]).
//!
//! [`brute_reverse_posterior`] computes the one-step reverse posterior by
//! enumerating clean data and intermediate states, and serves as the
//! reference both pieces are checked against.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{Alphabet, IndexPartition, JointTable, MarginalSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleFamily {
    Linear,
    LogLinear,
}

impl std::str::FromStr for ScheduleFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "log-linear" | "loglinear" => Ok(Self::LogLinear),
            other => Err(Error::Config(format!("unknown schedule family '{other}'"))),
        }
    }
}

pub const DEFAULT_EPSILON: f64 = 1e-3;

/// Cumulative mask probabilities `alpha_0 = 0 < alpha_1 < ... < alpha_T = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    family: ScheduleFamily,
    steps: usize,
    epsilon: f64,
    alphas: Vec<f64>,
}

/// Builds a schedule with `steps` denoising steps.
///
/// The log-linear family uses `sigma(s) = -log(1 - (1 - epsilon) s)` on the
/// grid `s = k / T` and sets `alpha_k = 1 - exp(-sigma(k / T))`. That grid
/// ends at `1 - epsilon`, so the final value is pinned to exactly 1 to keep
/// the all-mask prior.
pub fn make_schedule(family: ScheduleFamily, steps: usize, epsilon: f64) -> Result<NoiseSchedule> {
    if steps == 0 {
        return Err(Error::InvalidSchedule("need at least one step".into()));
    }
    let mut alphas = Vec::with_capacity(steps + 1);
    alphas.push(0.0);
    match family {
        ScheduleFamily::Linear => {
            alphas.extend((1..=steps).map(|k| k as f64 / steps as f64));
        }
        ScheduleFamily::LogLinear => {
            if !(epsilon > 0.0 && epsilon < 1.0) {
                return Err(Error::InvalidSchedule(format!(
                    "epsilon {epsilon} not in (0, 1)"
                )));
            }
            let sigma = |s: f64| -(1.0 - (1.0 - epsilon) * s).ln();
            alphas.extend((1..steps).map(|k| 1.0 - (-sigma(k as f64 / steps as f64)).exp()));
            alphas.push(1.0);
        }
    }
    alphas[steps] = 1.0;
    if alphas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidSchedule(format!(
            "alphas are not strictly increasing: {alphas:?}"
        )));
    }
    Ok(NoiseSchedule {
        family,
        steps,
        epsilon,
        alphas,
    })
}

impl NoiseSchedule {
    pub fn family(&self) -> ScheduleFamily {
        self.family
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `alpha_t` for `t` in `0..=T`.
    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t]
    }

    /// `alpha_1 .. alpha_T`.
    pub fn alphas(&self) -> &[f64] {
        &self.alphas[1..]
    }

    /// Probability that a token unmasked at `t - 1` becomes masked at `t`.
    pub fn step_mask_prob(&self, t: usize) -> f64 {
        let (prev, cur) = (self.alphas[t - 1], self.alphas[t]);
        if t == self.steps {
            1.0
        } else {
            (cur - prev) / (1.0 - prev)
        }
    }
}

/// Config form of a schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub family: ScheduleFamily,
    #[serde(rename = "T")]
    pub steps: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_chunk")]
    pub chunk_size: usize,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_chunk() -> usize {
    1
}

impl ScheduleSpec {
    pub fn build(&self) -> Result<NoiseSchedule> {
        if self.chunk_size == 0 {
            return Err(Error::InvalidSchedule(
                "chunk_size must be at least 1".into(),
            ));
        }
        make_schedule(self.family, self.steps, self.epsilon)
    }
}

/// `N` tokens at time `t`; a token equal to `mask` is masked.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SequenceState {
    pub tokens: Vec<usize>,
    pub time: usize,
    pub mask: usize,
}

impl SequenceState {
    pub fn new(tokens: Vec<usize>, time: usize, num_categories: usize) -> Result<Self> {
        if let Some(&t) = tokens.iter().find(|&&t| t > num_categories) {
            return Err(Error::InvalidState(format!(
                "token {t} exceeds mask index {num_categories}"
            )));
        }
        Ok(Self {
            tokens,
            time,
            mask: num_categories,
        })
    }

    /// The prior state: every position masked at time `t`.
    pub fn all_masked(num_positions: usize, num_categories: usize, time: usize) -> Self {
        Self {
            tokens: vec![num_categories; num_positions],
            time,
            mask: num_categories,
        }
    }

    pub fn num_positions(&self) -> usize {
        self.tokens.len()
    }

    pub fn num_categories(&self) -> usize {
        self.mask
    }

    pub fn is_masked(&self, i: usize) -> bool {
        self.tokens[i] == self.mask
    }

    pub fn is_mask_free(&self) -> bool {
        self.tokens.iter().all(|&t| t != self.mask)
    }

    pub fn num_masked(&self) -> usize {
        self.tokens.iter().filter(|&&t| t == self.mask).count()
    }

    pub fn partition(&self) -> IndexPartition {
        IndexPartition::from_tokens(&self.tokens, self.mask)
    }

    /// Unmasked tokens as evidence for conditioning.
    pub fn evidence(&self) -> Vec<Option<usize>> {
        self.tokens
            .iter()
            .map(|&t| (t != self.mask).then_some(t))
            .collect()
    }

    /// Copy with every position at or after `from` masked.
    pub fn mask_suffix(&self, from: usize) -> Self {
        let mut out = self.clone();
        out.tokens[from..].iter_mut().for_each(|t| *t = self.mask);
        out
    }

    /// Tokens rendered for text output, mask as `M`.
    pub fn render(&self) -> String {
        self.tokens
            .iter()
            .map(|&t| {
                if t == self.mask {
                    "M".to_string()
                } else {
                    t.to_string()
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Mask-free auxiliary sequence paired with a reverse step.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AuxSequence {
    pub tokens: Vec<usize>,
    pub time: usize,
}

impl AuxSequence {
    pub fn new(tokens: Vec<usize>, time: usize, num_categories: usize) -> Result<Self> {
        if let Some(&t) = tokens.iter().find(|&&t| t >= num_categories) {
            return Err(Error::InvalidState(format!(
                "auxiliary token {t} is not a data category"
            )));
        }
        Ok(Self { tokens, time })
    }
}

fn check_alignment(alphabet: Alphabet, state: &SequenceState) -> Result<()> {
    if state.num_positions() != alphabet.num_positions()
        || state.num_categories() != alphabet.num_categories()
    {
        return Err(Error::ShapeMismatch(
            "state and table alphabets differ".into(),
        ));
    }
    Ok(())
}

/// Chunk index of every position.
fn chunk_of(i: usize, chunk_size: usize) -> usize {
    i / chunk_size
}

/// Masks `x0` to time `t`. Positions in the same chunk share one draw.
pub fn forward_sample<R: Rng + ?Sized>(
    x0: &SequenceState,
    t: usize,
    schedule: &NoiseSchedule,
    chunk_size: usize,
    rng: &mut R,
) -> Result<SequenceState> {
    if !x0.is_mask_free() {
        return Err(Error::InvalidState(
            "forward sampling starts from a mask-free sequence".into(),
        ));
    }
    if t > schedule.steps() || chunk_size == 0 {
        return Err(Error::InvalidState(format!(
            "time {t} outside schedule or chunk_size 0"
        )));
    }
    let alpha = schedule.alpha(t);
    let mut out = x0.clone();
    out.time = t;
    let num_chunks = x0.num_positions().div_ceil(chunk_size);
    for chunk in 0..num_chunks {
        let masked = rng.random::<f64>() < alpha;
        if masked {
            let end = ((chunk + 1) * chunk_size).min(out.num_positions());
            out.tokens[chunk * chunk_size..end]
                .iter_mut()
                .for_each(|tok| *tok = out.mask);
        }
    }
    Ok(out)
}

/// Data distribution conditioned on the unmasked tokens of `x_next`, with
/// those positions clamped; a table over all `C^N` auxiliary sequences.
pub fn aux_posterior(data: &JointTable, x_next: &SequenceState) -> Result<JointTable> {
    let alphabet = data.alphabet();
    check_alignment(alphabet, x_next)?;
    let evidence = x_next.evidence();
    let mut weights = data.probs().to_vec();
    let mut tokens = vec![0; alphabet.num_positions()];
    for (k, w) in weights.iter_mut().enumerate() {
        alphabet.decode_into(k, &mut tokens);
        if !evidence
            .iter()
            .zip(&tokens)
            .all(|(e, &t)| e.is_none_or(|v| v == t))
        {
            *w = 0.0;
        }
    }
    if !(weights.iter().sum::<f64>() > 0.0) {
        return Err(Error::ZeroEvidence);
    }
    JointTable::from_weights(alphabet, weights)
}

/// The factorized re-masking step `q(x_t | x_tilde, x_{t+1})`.
#[derive(Clone, Debug)]
pub struct RemaskKernel {
    x_tilde: Vec<usize>,
    x_next: SequenceState,
    keep_mask_prob: f64,
    chunk_size: usize,
    time: usize,
}

impl RemaskKernel {
    /// Kernel from `x_next` (at `t + 1`) to time `t`.
    pub fn new(
        x_tilde: &AuxSequence,
        x_next: &SequenceState,
        schedule: &NoiseSchedule,
        t: usize,
        chunk_size: usize,
    ) -> Result<Self> {
        if x_next.time != t + 1 || t + 1 > schedule.steps() {
            return Err(Error::InvalidState(format!(
                "re-masking needs x_next at t + 1 = {} within T = {}, got time {}",
                t + 1,
                schedule.steps(),
                x_next.time
            )));
        }
        if chunk_size == 0 {
            return Err(Error::InvalidState("chunk_size must be at least 1".into()));
        }
        if x_tilde.tokens.len() != x_next.num_positions() {
            return Err(Error::ShapeMismatch(
                "auxiliary sequence length differs".into(),
            ));
        }
        if let Some(&t) = x_tilde.tokens.iter().find(|&&t| t >= x_next.mask) {
            return Err(Error::InvalidState(format!(
                "auxiliary token {t} is not a data category"
            )));
        }
        for (i, (&a, &b)) in x_tilde.tokens.iter().zip(&x_next.tokens).enumerate() {
            if b != x_next.mask && a != b {
                return Err(Error::ClampViolation { position: i });
            }
        }
        Ok(Self {
            x_tilde: x_tilde.tokens.clone(),
            x_next: x_next.clone(),
            keep_mask_prob: schedule.alpha(t) / schedule.alpha(t + 1),
            chunk_size,
            time: t,
        })
    }

    /// `alpha_t / alpha_{t+1}`.
    pub fn keep_mask_prob(&self) -> f64 {
        self.keep_mask_prob
    }

    /// Per-position rows over `C + 1` symbols. Exact for `chunk_size == 1`;
    /// with larger chunks these are the per-position marginals.
    pub fn rows(&self) -> MarginalSet {
        let width = self.x_next.mask + 1;
        let rows = (0..self.x_tilde.len())
            .map(|i| {
                let mut row = vec![0.0; width];
                if self.x_next.is_masked(i) {
                    row[self.x_next.mask] = self.keep_mask_prob;
                    row[self.x_tilde[i]] += 1.0 - self.keep_mask_prob;
                } else {
                    row[self.x_next.tokens[i]] = 1.0;
                }
                row
            })
            .collect();
        MarginalSet::new(rows, true).expect("kernel rows are distributions")
    }

    /// Probability of reaching `x_t` (tokens at time `t`).
    pub fn prob(&self, x_t: &[usize]) -> f64 {
        let mask = self.x_next.mask;
        let n = self.x_tilde.len();
        if x_t.len() != n {
            return 0.0;
        }
        let num_chunks = n.div_ceil(self.chunk_size);
        // Per chunk: None = no masked position seen yet, Some(true) = masked.
        let mut decision: Vec<Option<bool>> = vec![None; num_chunks];
        for i in 0..n {
            if !self.x_next.is_masked(i) {
                if x_t[i] != self.x_next.tokens[i] {
                    return 0.0;
                }
                continue;
            }
            let masked = if x_t[i] == mask {
                true
            } else if x_t[i] == self.x_tilde[i] {
                false
            } else {
                return 0.0;
            };
            let slot = &mut decision[chunk_of(i, self.chunk_size)];
            match slot {
                Some(prev) if *prev != masked => return 0.0,
                _ => *slot = Some(masked),
            }
        }
        decision
            .iter()
            .flatten()
            .map(|&m| {
                if m {
                    self.keep_mask_prob
                } else {
                    1.0 - self.keep_mask_prob
                }
            })
            .product()
    }

    /// Every reachable `x_t` with its probability.
    pub fn support(&self) -> Vec<(SequenceState, f64)> {
        let n = self.x_tilde.len();
        let num_chunks = n.div_ceil(self.chunk_size);
        let active: Vec<usize> = (0..num_chunks)
            .filter(|&k| {
                (0..n).any(|i| chunk_of(i, self.chunk_size) == k && self.x_next.is_masked(i))
            })
            .collect();
        let mut out = Vec::with_capacity(1 << active.len());
        for bits in 0..(1usize << active.len()) {
            let mut tokens = self.x_next.tokens.clone();
            let mut p = 1.0;
            for (b, &k) in active.iter().enumerate() {
                let masked = (bits >> b) & 1 == 1;
                p *= if masked {
                    self.keep_mask_prob
                } else {
                    1.0 - self.keep_mask_prob
                };
                if !masked {
                    for i in (0..n).filter(|&i| chunk_of(i, self.chunk_size) == k) {
                        if self.x_next.is_masked(i) {
                            tokens[i] = self.x_tilde[i];
                        }
                    }
                }
            }
            if p > 0.0 {
                out.push((
                    SequenceState {
                        tokens,
                        time: self.time,
                        mask: self.x_next.mask,
                    },
                    p,
                ));
            }
        }
        out
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SequenceState {
        let n = self.x_tilde.len();
        let num_chunks = n.div_ceil(self.chunk_size);
        let keep: Vec<bool> = (0..num_chunks)
            .map(|_| rng.random::<f64>() < self.keep_mask_prob)
            .collect();
        let tokens = (0..n)
            .map(|i| {
                if !self.x_next.is_masked(i) {
                    self.x_next.tokens[i]
                } else if keep[chunk_of(i, self.chunk_size)] {
                    self.x_next.mask
                } else {
                    self.x_tilde[i]
                }
            })
            .collect();
        SequenceState {
            tokens,
            time: self.time,
            mask: self.x_next.mask,
        }
    }
}

/// Exact one-step reverse posterior `q(x_t | x_{t+1})` as a table over the
/// masked alphabet (`(C + 1)^N` states), by enumerating clean data `x_0` and
/// intermediate states `x_t` and applying Bayes' rule.
pub fn brute_reverse_posterior(
    data: &JointTable,
    x_next: &SequenceState,
    schedule: &NoiseSchedule,
    t: usize,
) -> Result<JointTable> {
    let alphabet = data.alphabet();
    check_alignment(alphabet, x_next)?;
    if t + 1 > schedule.steps() || x_next.time != t + 1 {
        return Err(Error::InvalidState(
            "x_next must sit at t + 1 within the schedule".into(),
        ));
    }
    let masked_alphabet = alphabet.with_mask()?;
    let mask = alphabet.mask_index();
    let n = alphabet.num_positions();
    let alpha_t = schedule.alpha(t);
    let step = schedule.step_mask_prob(t + 1);

    let mut weights = vec![0.0; masked_alphabet.num_states()];
    let mut x0 = vec![0; n];
    let mut xt = vec![0; n];
    for (k, &p0) in data.probs().iter().enumerate() {
        if p0 == 0.0 {
            continue;
        }
        alphabet.decode_into(k, &mut x0);
        for pattern in 0..(1usize << n) {
            let mut w = p0;
            for i in 0..n {
                let masked_at_t = (pattern >> i) & 1 == 1;
                xt[i] = if masked_at_t { mask } else { x0[i] };
                w *= if masked_at_t { alpha_t } else { 1.0 - alpha_t };
                // Forward transition of position i from t to t + 1.
                w *= match (masked_at_t, x_next.tokens[i] == mask) {
                    (true, true) => 1.0,
                    (true, false) => 0.0,
                    (false, true) => step,
                    (false, false) => {
                        if x_next.tokens[i] == x0[i] {
                            1.0 - step
                        } else {
                            0.0
                        }
                    }
                };
                if w == 0.0 {
                    break;
                }
            }
            if w > 0.0 {
                weights[masked_alphabet.index_of(&xt)] += w;
            }
        }
    }
    if !(weights.iter().sum::<f64>() > 0.0) {
        return Err(Error::Unreachable);
    }
    JointTable::from_weights(masked_alphabet, weights)
}

/// Right-hand side of the factorization identity:
/// `sum_{x_tilde} q(x_tilde | x_{t+1}) q(x_t | x_tilde, x_{t+1})`.
pub fn reverse_posterior_via_aux(
    data: &JointTable,
    x_next: &SequenceState,
    schedule: &NoiseSchedule,
    t: usize,
) -> Result<JointTable> {
    let alphabet = data.alphabet();
    let aux = aux_posterior(data, x_next)?;
    let masked_alphabet = alphabet.with_mask()?;
    let mut weights = vec![0.0; masked_alphabet.num_states()];
    for (k, &pa) in aux.probs().iter().enumerate() {
        if pa == 0.0 {
            continue;
        }
        let x_tilde = AuxSequence {
            tokens: alphabet.decode(k),
            time: t,
        };
        let kernel = RemaskKernel::new(&x_tilde, x_next, schedule, t, 1)?;
        for (state, pk) in kernel.support() {
            weights[masked_alphabet.index_of(&state.tokens)] += pa * pk;
        }
    }
    JointTable::from_weights(masked_alphabet, weights)
}

/// Per-position rows of a table over the masked alphabet.
pub fn masked_marginals(posterior: &JointTable) -> MarginalSet {
    let rows = crate::table::univariate_marginals(posterior)
        .rows()
        .to_vec();
    MarginalSet::new(rows, true).expect("marginals of a normalized table")
}

/// Drops the mask column and renormalizes each row. Rows of unmasked
/// positions become point masses at their (largest) data category.
pub fn renormalize_marginals(m: &MarginalSet, partition: &IndexPartition) -> Result<MarginalSet> {
    if !m.includes_mask() {
        return Err(Error::ShapeMismatch(
            "expected rows that include the mask column".into(),
        ));
    }
    if partition.num_positions() != m.num_positions() {
        return Err(Error::ShapeMismatch(
            "partition and marginal set sizes differ".into(),
        ));
    }
    let c = m.num_categories();
    let mut rows = Vec::with_capacity(m.num_positions());
    for (i, row) in m.rows().iter().enumerate() {
        let data = &row[..c];
        let total: f64 = data.iter().sum();
        if !(total > 0.0) {
            return Err(Error::DegenerateMarginal { position: i });
        }
        if partition.is_masked(i) {
            rows.push(data.iter().map(|p| p / total).collect());
        } else {
            let top = (0..c).fold(0, |best, k| if data[k] > data[best] { k } else { best });
            let mut point = vec![0.0; c];
            point[top] = 1.0;
            rows.push(point);
        }
    }
    MarginalSet::new(rows, false)
}

/// Distribution of `x_t` under the forward process, over the masked alphabet.
pub fn forward_marginal(
    data: &JointTable,
    schedule: &NoiseSchedule,
    t: usize,
) -> Result<JointTable> {
    let alphabet = data.alphabet();
    let masked_alphabet = alphabet.with_mask()?;
    let mask = alphabet.mask_index();
    let n = alphabet.num_positions();
    let alpha = schedule.alpha(t);
    let mut weights = vec![0.0; masked_alphabet.num_states()];
    let mut x0 = vec![0; n];
    let mut xt = vec![0; n];
    for (k, &p0) in data.probs().iter().enumerate() {
        if p0 == 0.0 {
            continue;
        }
        alphabet.decode_into(k, &mut x0);
        for pattern in 0..(1usize << n) {
            let mut w = p0;
            for i in 0..n {
                let masked = (pattern >> i) & 1 == 1;
                xt[i] = if masked { mask } else { x0[i] };
                w *= if masked { alpha } else { 1.0 - alpha };
            }
            if w > 0.0 {
                weights[masked_alphabet.index_of(&xt)] += w;
            }
        }
    }
    JointTable::from_weights(masked_alphabet, weights)
}
