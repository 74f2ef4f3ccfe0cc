//! The two probability sources the sampler fuses.
//!
//! Both are backed by a dense table: either the exact data table (the
//! optimal model of each kind) or a Laplace-smoothed count table fitted to a
//! corpus of full sequences. Contexts are handled by exact conditioning of
//! that one table.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noising::{NoiseSchedule, SequenceState};
use crate::table::{Alphabet, JointTable, MarginalSet};

pub const DEFAULT_SMOOTHING: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Exact,
    Counts,
}

/// A table-backed probability source, as stored in model files.
#[derive(Clone, Debug, PartialEq)]
pub struct TableSource {
    kind: ModelKind,
    table: JointTable,
    counts: Option<Vec<u64>>,
    smoothing: f64,
}

impl TableSource {
    pub fn exact(table: JointTable) -> Self {
        Self {
            kind: ModelKind::Exact,
            table,
            counts: None,
            smoothing: 0.0,
        }
    }

    /// Additive smoothing over full-sequence counts:
    /// `(count(x) + smoothing) / (n + smoothing * C^N)`.
    pub fn from_counts(alphabet: Alphabet, counts: Vec<u64>, smoothing: f64) -> Result<Self> {
        if counts.len() != alphabet.num_states() {
            return Err(Error::ShapeMismatch(
                "count vector has the wrong length".into(),
            ));
        }
        if !(smoothing > 0.0) {
            return Err(Error::Config("smoothing must be positive".into()));
        }
        let weights = counts.iter().map(|&c| c as f64 + smoothing).collect();
        let table = JointTable::from_weights(alphabet, weights)?;
        Ok(Self {
            kind: ModelKind::Counts,
            table,
            counts: Some(counts),
            smoothing,
        })
    }

    pub fn fit(alphabet: Alphabet, corpus: &[Vec<usize>], smoothing: f64) -> Result<Self> {
        let mut counts = vec![0u64; alphabet.num_states()];
        for seq in corpus {
            alphabet.check_tokens(seq)?;
            counts[alphabet.index_of(seq)] += 1;
        }
        Self::from_counts(alphabet, counts, smoothing)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn table(&self) -> &JointTable {
        &self.table
    }

    pub fn alphabet(&self) -> Alphabet {
        self.table.alphabet()
    }

    pub fn to_json(&self) -> Result<String> {
        let a = self.alphabet();
        let payload = match &self.counts {
            Some(counts) => Payload::Counts {
                counts: counts.clone(),
                smoothing: self.smoothing,
            },
            None => Payload::Exact {
                probs: self.table.probs().to_vec(),
            },
        };
        let doc = ModelDocument {
            version: MODEL_FORMAT_VERSION,
            kind: self.kind,
            n: a.num_positions(),
            c: a.num_categories(),
            payload,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.version != MODEL_FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported model version {}",
                doc.version
            )));
        }
        let alphabet = Alphabet::new(doc.n, doc.c)?;
        match (doc.kind, doc.payload) {
            (ModelKind::Exact, Payload::Exact { probs }) => {
                Ok(Self::exact(JointTable::from_stored(alphabet, probs)?))
            }
            (ModelKind::Counts, Payload::Counts { counts, smoothing }) => {
                Self::from_counts(alphabet, counts, smoothing)
            }
            (kind, _) => Err(Error::Parse(format!(
                "payload does not match kind {kind:?}"
            ))),
        }
    }
}

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    version: u32,
    kind: ModelKind,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "C")]
    c: usize,
    payload: Payload,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum Payload {
    Exact { probs: Vec<f64> },
    Counts { counts: Vec<u64>, smoothing: f64 },
}

/// Parses a corpus: one sequence of `N` whitespace-separated tokens per line.
/// Blank lines are skipped.
pub fn parse_corpus(text: &str, alphabet: Alphabet) -> Result<Vec<Vec<usize>>> {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(lineno, line)| {
            let seq = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<usize>()
                        .map_err(|e| Error::Parse(format!("line {}: {tok:?}: {e}", lineno + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            alphabet
                .check_tokens(&seq)
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            Ok(seq)
        })
        .collect()
}

pub fn write_corpus(corpus: &[Vec<usize>]) -> String {
    let mut out = String::new();
    for seq in corpus {
        let line: Vec<String> = seq.iter().map(usize::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Per-position marginals of `table` conditioned on the unmasked tokens of
/// `context`. Unmasked positions come out as point masses.
fn conditional_marginals(table: &JointTable, context: &SequenceState) -> Result<MarginalSet> {
    let alphabet = table.alphabet();
    let n = alphabet.num_positions();
    let c = alphabet.num_categories();
    let evidence = context.evidence();
    let mut rows = vec![vec![0.0; c]; n];
    let mut tokens = vec![0; n];
    let mut total = 0.0;
    for (k, &p) in table.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        alphabet.decode_into(k, &mut tokens);
        if evidence
            .iter()
            .zip(&tokens)
            .all(|(e, &t)| e.is_none_or(|v| v == t))
        {
            total += p;
            for (row, &tok) in rows.iter_mut().zip(&tokens) {
                row[tok] += p;
            }
        }
    }
    if !(total > 0.0) {
        return Err(Error::ZeroEvidence);
    }
    for row in &mut rows {
        row.iter_mut().for_each(|x| *x /= total);
    }
    MarginalSet::new(rows, false)
}

fn check_context(
    alphabet: Alphabet,
    schedule: &NoiseSchedule,
    x_next: &SequenceState,
    t: usize,
) -> Result<()> {
    if x_next.num_positions() != alphabet.num_positions()
        || x_next.num_categories() != alphabet.num_categories()
    {
        return Err(Error::ShapeMismatch(
            "context and model alphabets differ".into(),
        ));
    }
    if x_next.time != t + 1 || t + 1 > schedule.steps() {
        return Err(Error::InvalidState(format!(
            "context must be at time t + 1 = {} (T = {}), got {}",
            t + 1,
            schedule.steps(),
            x_next.time
        )));
    }
    Ok(())
}

/// Denoiser producing per-position marginals of the auxiliary sequence.
///
/// Auxiliary marginals do not depend on `t` under the absorbing process; the
/// schedule is kept so contexts can be validated and so the masked-symbol
/// view can be reconstructed.
#[derive(Clone, Debug)]
pub struct DiffusionMarginalModel {
    source: TableSource,
    schedule: NoiseSchedule,
}

impl DiffusionMarginalModel {
    pub fn new(source: TableSource, schedule: NoiseSchedule) -> Self {
        Self { source, schedule }
    }

    pub fn exact(data: &JointTable, schedule: NoiseSchedule) -> Self {
        Self::new(TableSource::exact(data.clone()), schedule)
    }

    pub fn source(&self) -> &TableSource {
        &self.source
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    pub fn alphabet(&self) -> Alphabet {
        self.source.alphabet()
    }

    /// `p_dm(x_tilde^i | x_{t+1})` for every position, conditioning on all
    /// unmasked tokens.
    pub fn marginals_full(&self, x_next: &SequenceState, t: usize) -> Result<MarginalSet> {
        check_context(self.alphabet(), &self.schedule, x_next, t)?;
        conditional_marginals(self.source.table(), x_next)
    }

    /// `p_dm(x_tilde^i | x_{t+1}^{<i})`: row `i` sees only the unmasked
    /// tokens to its left.
    pub fn marginals_causal(&self, x_next: &SequenceState, t: usize) -> Result<MarginalSet> {
        check_context(self.alphabet(), &self.schedule, x_next, t)?;
        let n = x_next.num_positions();
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let context = x_next.mask_suffix(i);
            rows.push(
                conditional_marginals(self.source.table(), &context)?
                    .row(i)
                    .to_vec(),
            );
        }
        MarginalSet::new(rows, false)
    }

    /// `p_dm(X_t^i | x_{t+1})` over `C + 1` symbols: the auxiliary marginal
    /// scaled by the reveal probability, plus the stay-masked mass on masked
    /// positions.
    pub fn marginals_with_mask(&self, x_next: &SequenceState, t: usize) -> Result<MarginalSet> {
        let aux = self.marginals_full(x_next, t)?;
        let keep = self.schedule.alpha(t) / self.schedule.alpha(t + 1);
        let rows = aux
            .rows()
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut out: Vec<f64> = row.to_vec();
                if x_next.is_masked(i) {
                    out.iter_mut().for_each(|p| *p *= 1.0 - keep);
                    out.push(keep);
                } else {
                    out.push(0.0);
                }
                out
            })
            .collect();
        MarginalSet::new(rows, true)
    }
}

/// Autoregressive model `p(x) = prod_i p(x_i | x_{<i})`.
#[derive(Clone, Debug)]
pub struct ARCopulaModel {
    source: TableSource,
    /// `prefix_mass[k]` holds `p(x_0 .. x_{k-1})` for every prefix of length `k`.
    prefix_mass: Vec<Vec<f64>>,
}

impl ARCopulaModel {
    pub fn new(source: TableSource) -> Self {
        let alphabet = source.alphabet();
        let n = alphabet.num_positions();
        let c = alphabet.num_categories();
        let mut prefix_mass = vec![Vec::new(); n + 1];
        prefix_mass[n] = source.table().probs().to_vec();
        for k in (0..n).rev() {
            prefix_mass[k] = prefix_mass[k + 1]
                .chunks(c)
                .map(|chunk| chunk.iter().sum())
                .collect();
        }
        Self {
            source,
            prefix_mass,
        }
    }

    pub fn exact(data: &JointTable) -> Self {
        Self::new(TableSource::exact(data.clone()))
    }

    pub fn source(&self) -> &TableSource {
        &self.source
    }

    pub fn alphabet(&self) -> Alphabet {
        self.source.alphabet()
    }

    /// `p(x_i | x_{<i} = prefix)` with `i = prefix.len()`.
    pub fn conditional(&self, prefix: &[usize]) -> Result<Vec<f64>> {
        let alphabet = self.alphabet();
        let c = alphabet.num_categories();
        let i = prefix.len();
        if i >= alphabet.num_positions() {
            return Err(Error::ShapeMismatch(format!(
                "prefix of length {i} leaves no position"
            )));
        }
        if let Some(&t) = prefix.iter().find(|&&t| t >= c) {
            return Err(Error::InvalidState(format!(
                "prefix token {t} is not a data category"
            )));
        }
        let base = prefix.iter().fold(0, |acc, &t| acc * c + t);
        let denom = self.prefix_mass[i][base];
        if !(denom > 0.0) {
            return Err(Error::ZeroEvidence);
        }
        Ok(self.prefix_mass[i + 1][base * c..(base + 1) * c]
            .iter()
            .map(|p| p / denom)
            .collect())
    }

    /// Copula conditional with clamps: unmasked positions of `x_next` are
    /// point masses; masked positions condition on the (clamped) prefix only.
    pub fn copula_conditional(&self, x_next: &SequenceState, prefix: &[usize]) -> Result<Vec<f64>> {
        let i = prefix.len();
        if i >= x_next.num_positions() {
            return Err(Error::ShapeMismatch("prefix covers every position".into()));
        }
        for (j, &tok) in prefix.iter().enumerate() {
            if !x_next.is_masked(j) && x_next.tokens[j] != tok {
                return Err(Error::ClampViolation { position: j });
            }
        }
        if !x_next.is_masked(i) {
            let mut point = vec![0.0; self.alphabet().num_categories()];
            point[x_next.tokens[i]] = 1.0;
            return Ok(point);
        }
        self.conditional(prefix)
    }

    /// Chain-rule probability of a full sequence.
    pub fn sequence_prob(&self, tokens: &[usize]) -> Result<f64> {
        let mut p = 1.0;
        for i in 0..tokens.len() {
            p *= self.conditional(&tokens[..i])?[tokens[i]];
        }
        Ok(p)
    }
}
