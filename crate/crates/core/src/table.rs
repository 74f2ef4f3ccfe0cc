//! Dense joint tables over `N` categorical positions, their univariate
//! marginals, and the information quantities computed from them.
//!
//! Every dense array uses one enumeration order: lexicographic with
//! position 0 as the most significant digit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest state space any exact routine will enumerate.
pub const MAX_STATES: u64 = 10_000_000;

/// Entries below this are raised to it when a table is made strictly positive.
pub const POSITIVE_FLOOR: f64 = 1e-12;

const SUM_TOLERANCE: f64 = 1e-9;

/// `N` positions, each taking one of `C` data categories.
///
/// Index `C` is reserved for the mask token; it only appears in sequence
/// states, never in a data table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alphabet {
    num_positions: usize,
    num_categories: usize,
}

impl Alphabet {
    pub fn new(num_positions: usize, num_categories: usize) -> Result<Self> {
        if num_positions == 0 {
            return Err(Error::InvalidAlphabet("need at least one position".into()));
        }
        if num_categories < 2 {
            return Err(Error::InvalidAlphabet(format!(
                "need at least two categories, got {num_categories}"
            )));
        }
        check_cap(num_positions, num_categories)?;
        Ok(Self {
            num_positions,
            num_categories,
        })
    }

    /// Zero positions: one state, used for the remainder of a fully observed table.
    pub(crate) fn empty(num_categories: usize) -> Self {
        Self {
            num_positions: 0,
            num_categories,
        }
    }

    /// Same positions with one extra symbol (the mask) appended.
    pub fn with_mask(&self) -> Result<Self> {
        check_cap(self.num_positions, self.num_categories + 1)?;
        Ok(Self {
            num_positions: self.num_positions,
            num_categories: self.num_categories + 1,
        })
    }

    pub fn num_positions(&self) -> usize {
        self.num_positions
    }

    pub fn num_categories(&self) -> usize {
        self.num_categories
    }

    pub fn mask_index(&self) -> usize {
        self.num_categories
    }

    pub fn num_states(&self) -> usize {
        self.num_categories.pow(self.num_positions as u32)
    }

    /// Dense index of an assignment.
    pub fn index_of(&self, tokens: &[usize]) -> usize {
        debug_assert_eq!(tokens.len(), self.num_positions);
        tokens
            .iter()
            .fold(0, |acc, &t| acc * self.num_categories + t)
    }

    /// Inverse of [`Alphabet::index_of`], written into `out`.
    pub fn decode_into(&self, mut index: usize, out: &mut [usize]) {
        for slot in out.iter_mut().rev() {
            *slot = index % self.num_categories;
            index /= self.num_categories;
        }
    }

    pub fn decode(&self, index: usize) -> Vec<usize> {
        let mut out = vec![0; self.num_positions];
        self.decode_into(index, &mut out);
        out
    }

    /// All assignments in enumeration order.
    pub fn states(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.num_states()).map(move |k| self.decode(k))
    }

    /// Checks that every token is a data category.
    pub fn check_tokens(&self, tokens: &[usize]) -> Result<()> {
        if tokens.len() != self.num_positions {
            return Err(Error::ShapeMismatch(format!(
                "expected {} tokens, got {}",
                self.num_positions,
                tokens.len()
            )));
        }
        if let Some(&t) = tokens.iter().find(|&&t| t >= self.num_categories) {
            return Err(Error::InvalidState(format!(
                "token {t} outside 0..{}",
                self.num_categories
            )));
        }
        Ok(())
    }
}

fn check_cap(num_positions: usize, num_categories: usize) -> Result<()> {
    let states = (num_categories as u128)
        .checked_pow(num_positions as u32)
        .unwrap_or(u128::MAX);
    if states > MAX_STATES as u128 {
        return Err(Error::TooLarge {
            states,
            cap: MAX_STATES,
        });
    }
    Ok(())
}

/// Exact probability distribution over all `C^N` assignments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableDocument", into = "TableDocument")]
pub struct JointTable {
    alphabet: Alphabet,
    probs: Vec<f64>,
}

impl JointTable {
    /// Wraps probabilities that already sum to one (within 1e-9); the sum is
    /// then made exact by rescaling.
    pub fn new(alphabet: Alphabet, probs: Vec<f64>) -> Result<Self> {
        check_entries(alphabet, &probs)?;
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::NotNormalized(total));
        }
        Ok(Self {
            alphabet,
            probs: probs.into_iter().map(|p| p / total).collect(),
        })
    }

    /// Validates like [`JointTable::new`] but keeps the values bit-for-bit.
    pub(crate) fn from_stored(alphabet: Alphabet, probs: Vec<f64>) -> Result<Self> {
        check_entries(alphabet, &probs)?;
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::NotNormalized(total));
        }
        Ok(Self { alphabet, probs })
    }

    /// Normalizes arbitrary nonnegative weights.
    pub fn from_weights(alphabet: Alphabet, weights: Vec<f64>) -> Result<Self> {
        check_entries(alphabet, &weights)?;
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::NotNormalized(total));
        }
        Ok(Self {
            alphabet,
            probs: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    /// Normalizes log-weights with a max-shift, so no finite input overflows.
    pub fn from_log_weights(alphabet: Alphabet, log_weights: &[f64]) -> Result<(Self, f64)> {
        if log_weights.len() != alphabet.num_states() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} entries, got {}",
                alphabet.num_states(),
                log_weights.len()
            )));
        }
        let log_z = crate::numeric::logsumexp(log_weights);
        if !log_z.is_finite() {
            return Err(Error::NotNormalized(log_z.exp()));
        }
        let probs = log_weights.iter().map(|lw| (lw - log_z).exp()).collect();
        Ok((Self { alphabet, probs }, log_z))
    }

    pub fn uniform(alphabet: Alphabet) -> Self {
        let n = alphabet.num_states();
        Self {
            alphabet,
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(alphabet: Alphabet, tokens: &[usize]) -> Result<Self> {
        alphabet.check_tokens(tokens)?;
        let mut probs = vec![0.0; alphabet.num_states()];
        probs[alphabet.index_of(tokens)] = 1.0;
        Ok(Self { alphabet, probs })
    }

    /// Fully factorized table with the given rows as its marginals.
    pub fn product(marginals: &MarginalSet) -> Result<Self> {
        if marginals.includes_mask() {
            return Err(Error::ShapeMismatch(
                "product of rows that include the mask".into(),
            ));
        }
        let alphabet = Alphabet::new(marginals.num_positions(), marginals.width())?;
        let mut tokens = vec![0; alphabet.num_positions()];
        let probs = (0..alphabet.num_states())
            .map(|k| {
                alphabet.decode_into(k, &mut tokens);
                tokens
                    .iter()
                    .enumerate()
                    .map(|(i, &c)| marginals.row(i)[c])
                    .product()
            })
            .collect();
        Ok(Self { alphabet, probs })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    pub fn prob(&self, tokens: &[usize]) -> f64 {
        self.probs[self.alphabet.index_of(tokens)]
    }

    pub fn is_positive(&self) -> bool {
        self.probs.iter().all(|&p| p > 0.0)
    }

    /// Floors every entry at [`POSITIVE_FLOOR`] and renormalizes.
    pub fn positive(&self) -> Self {
        let floored: Vec<f64> = self.probs.iter().map(|&p| p.max(POSITIVE_FLOOR)).collect();
        let total: f64 = floored.iter().sum();
        Self {
            alphabet: self.alphabet,
            probs: floored.into_iter().map(|p| p / total).collect(),
        }
    }

    pub fn total_variation(&self, other: &JointTable) -> f64 {
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    pub fn max_abs_diff(&self, other: &JointTable) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn check_entries(alphabet: Alphabet, probs: &[f64]) -> Result<()> {
    if probs.len() != alphabet.num_states() {
        return Err(Error::ShapeMismatch(format!(
            "expected {} entries, got {}",
            alphabet.num_states(),
            probs.len()
        )));
    }
    if let Some((index, &value)) = probs
        .iter()
        .enumerate()
        .find(|(_, &p)| !(p >= 0.0) || !p.is_finite())
    {
        return Err(Error::InvalidProbability { index, value });
    }
    Ok(())
}

/// Versioned on-disk form of a [`JointTable`].
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableDocument {
    version: u32,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "C")]
    c: usize,
    probs: Vec<f64>,
}

pub(crate) const TABLE_FORMAT_VERSION: u32 = 1;

impl TryFrom<TableDocument> for JointTable {
    type Error = Error;

    fn try_from(doc: TableDocument) -> Result<Self> {
        if doc.version != TABLE_FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported table version {}",
                doc.version
            )));
        }
        JointTable::from_stored(Alphabet::new(doc.n, doc.c)?, doc.probs)
    }
}

impl From<JointTable> for TableDocument {
    fn from(t: JointTable) -> Self {
        TableDocument {
            version: TABLE_FORMAT_VERSION,
            n: t.alphabet.num_positions,
            c: t.alphabet.num_categories,
            probs: t.probs,
        }
    }
}

/// One categorical row per position, over `C` data categories or, when
/// `includes_mask` is set, over `C + 1` symbols with the mask last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalSet {
    rows: Vec<Vec<f64>>,
    includes_mask: bool,
}

impl MarginalSet {
    pub fn new(rows: Vec<Vec<f64>>, includes_mask: bool) -> Result<Self> {
        let width = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || width < 2 {
            return Err(Error::ShapeMismatch(
                "marginal set needs rows of width >= 2".into(),
            ));
        }
        let mut normalized = Vec::with_capacity(rows.len());
        for row in rows {
            if row.len() != width {
                return Err(Error::ShapeMismatch("ragged marginal rows".into()));
            }
            if let Some((index, &value)) = row
                .iter()
                .enumerate()
                .find(|(_, &p)| !(p >= 0.0) || !p.is_finite())
            {
                return Err(Error::InvalidProbability { index, value });
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > SUM_TOLERANCE {
                return Err(Error::NotNormalized(total));
            }
            normalized.push(row.into_iter().map(|p| p / total).collect());
        }
        Ok(Self {
            rows: normalized,
            includes_mask,
        })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn num_positions(&self) -> usize {
        self.rows.len()
    }

    /// Row width, including the mask column if present.
    pub fn width(&self) -> usize {
        self.rows[0].len()
    }

    /// Number of data categories.
    pub fn num_categories(&self) -> usize {
        if self.includes_mask {
            self.width() - 1
        } else {
            self.width()
        }
    }

    pub fn includes_mask(&self) -> bool {
        self.includes_mask
    }

    pub fn max_abs_diff(&self, other: &MarginalSet) -> f64 {
        self.rows
            .iter()
            .zip(&other.rows)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// Split of positions into masked (`I`) and unmasked (`J`), both ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexPartition {
    masked: Vec<usize>,
    unmasked: Vec<usize>,
}

impl IndexPartition {
    pub fn new(num_positions: usize, masked: &[usize]) -> Result<Self> {
        let mut flags = vec![false; num_positions];
        for &i in masked {
            if i >= num_positions || flags[i] {
                return Err(Error::InvalidState(format!("bad masked index {i}")));
            }
            flags[i] = true;
        }
        Ok(Self::from_flags(&flags))
    }

    /// Masked positions are those holding `mask`.
    pub fn from_tokens(tokens: &[usize], mask: usize) -> Self {
        let flags: Vec<bool> = tokens.iter().map(|&t| t == mask).collect();
        Self::from_flags(&flags)
    }

    fn from_flags(flags: &[bool]) -> Self {
        let masked = (0..flags.len()).filter(|&i| flags[i]).collect();
        let unmasked = (0..flags.len()).filter(|&i| !flags[i]).collect();
        Self { masked, unmasked }
    }

    pub fn masked(&self) -> &[usize] {
        &self.masked
    }

    pub fn unmasked(&self) -> &[usize] {
        &self.unmasked
    }

    pub fn num_positions(&self) -> usize {
        self.masked.len() + self.unmasked.len()
    }

    pub fn is_masked(&self, i: usize) -> bool {
        self.masked.binary_search(&i).is_ok()
    }
}

/// Shannon entropy in nats, with `0 log 0 = 0`.
pub fn entropy(p: &JointTable) -> f64 {
    -p.probs
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

/// `KL(p || q)` in nats.
pub fn kl(p: &JointTable, q: &JointTable) -> Result<f64> {
    if p.alphabet != q.alphabet {
        return Err(Error::ShapeMismatch("kl over different alphabets".into()));
    }
    let mut total = 0.0;
    for (index, (&a, &b)) in p.probs.iter().zip(&q.probs).enumerate() {
        if a > 0.0 {
            if b <= 0.0 {
                return Err(Error::NotAbsolutelyContinuous { index, p: a });
            }
            total += a * (a / b).ln();
        }
    }
    // Rounding can push an exact zero slightly negative.
    Ok(total.max(0.0))
}

/// Exact per-position marginals.
pub fn univariate_marginals(p: &JointTable) -> MarginalSet {
    let alphabet = p.alphabet;
    let n = alphabet.num_positions();
    let c = alphabet.num_categories();
    let mut rows = vec![vec![0.0; c]; n];
    let mut tokens = vec![0; n];
    for (k, &prob) in p.probs.iter().enumerate() {
        alphabet.decode_into(k, &mut tokens);
        for (i, &t) in tokens.iter().enumerate() {
            rows[i][t] += prob;
        }
    }
    MarginalSet {
        rows,
        includes_mask: false,
    }
}

/// `KL(p || prod_i p_i)`.
pub fn total_correlation(p: &JointTable) -> f64 {
    let m = univariate_marginals(p);
    let alphabet = p.alphabet;
    let mut tokens = vec![0; alphabet.num_positions()];
    let mut total = 0.0;
    for (k, &prob) in p.probs.iter().enumerate() {
        if prob > 0.0 {
            alphabet.decode_into(k, &mut tokens);
            let log_prod: f64 = tokens
                .iter()
                .enumerate()
                .map(|(i, &t)| m.rows[i][t].ln())
                .sum();
            total += prob * (prob.ln() - log_prod);
        }
    }
    total.max(0.0)
}

/// Conditional table over the positions left unobserved by `evidence`
/// (`Some(token)` = observed), in their original order.
pub fn condition(p: &JointTable, evidence: &[Option<usize>]) -> Result<JointTable> {
    let alphabet = p.alphabet;
    if evidence.len() != alphabet.num_positions() {
        return Err(Error::ShapeMismatch(
            "evidence length differs from N".into(),
        ));
    }
    if let Some(&t) = evidence
        .iter()
        .flatten()
        .find(|&&t| t >= alphabet.num_categories())
    {
        return Err(Error::InvalidState(format!(
            "evidence token {t} is not a data category"
        )));
    }
    let free: Vec<usize> = (0..evidence.len())
        .filter(|&i| evidence[i].is_none())
        .collect();
    let rest = if free.is_empty() {
        Alphabet::empty(alphabet.num_categories())
    } else {
        Alphabet::new(free.len(), alphabet.num_categories())?
    };
    let mut weights = vec![0.0; rest.num_states()];
    let mut tokens = vec![0; alphabet.num_positions()];
    for (k, &prob) in p.probs.iter().enumerate() {
        alphabet.decode_into(k, &mut tokens);
        if evidence
            .iter()
            .zip(&tokens)
            .all(|(e, &t)| e.is_none_or(|v| v == t))
        {
            let sub = free
                .iter()
                .fold(0, |acc, &i| acc * rest.num_categories() + tokens[i]);
            weights[sub] += prob;
        }
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroEvidence);
    }
    Ok(JointTable {
        alphabet: rest,
        probs: weights.into_iter().map(|w| w / total).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(n: usize, c: usize, w: &[f64]) -> JointTable {
        JointTable::from_weights(Alphabet::new(n, c).unwrap(), w.to_vec()).unwrap()
    }

    #[test]
    fn enumeration_order_is_lexicographic() {
        let a = Alphabet::new(3, 2).unwrap();
        assert_eq!(a.index_of(&[1, 0, 0]), 4);
        assert_eq!(a.decode(6), vec![1, 1, 0]);
        let all: Vec<_> = a.states().collect();
        assert_eq!(all[1], vec![0, 0, 1]);
    }

    #[test]
    fn alphabet_cap_and_degenerate_sizes() {
        assert!(Alphabet::new(0, 2).is_err());
        assert!(Alphabet::new(3, 1).is_err());
        assert!(matches!(Alphabet::new(24, 2), Err(Error::TooLarge { .. })));
        assert!(Alphabet::new(7, 10).is_ok());
        assert!(Alphabet::new(7, 10).unwrap().with_mask().is_err());
    }

    #[test]
    fn entropy_of_point_mass_and_uniform() {
        let a = Alphabet::new(3, 2).unwrap();
        assert_eq!(
            entropy(&JointTable::point_mass(a, &[1, 0, 1]).unwrap()),
            0.0
        );
        assert!((entropy(&JointTable::uniform(a)) - 8f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn kl_point_mass_against_uniform() {
        let a = Alphabet::new(2, 2).unwrap();
        let p = JointTable::point_mass(a, &[0, 1]).unwrap();
        let q = JointTable::uniform(a);
        assert!((kl(&p, &q).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert_eq!(kl(&q, &q).unwrap(), 0.0);
        assert!(matches!(
            kl(&q, &p),
            Err(Error::NotAbsolutelyContinuous { .. })
        ));
    }

    #[test]
    fn product_roundtrips_through_marginals() {
        let m = MarginalSet::new(vec![vec![0.2, 0.8], vec![0.5, 0.3, 0.2]], false);
        assert!(m.is_err(), "ragged rows must be rejected");
        let m = MarginalSet::new(vec![vec![0.2, 0.8], vec![0.7, 0.3]], false).unwrap();
        let p = JointTable::product(&m).unwrap();
        assert!(univariate_marginals(&p).max_abs_diff(&m) < 1e-15);
        assert!(total_correlation(&p) < 1e-15);
    }

    #[test]
    fn total_correlation_of_perfectly_coupled_pair() {
        let p = table(2, 2, &[0.5, 0.0, 0.0, 0.5]);
        assert!((total_correlation(&p) - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn condition_edge_cases() {
        let p = table(2, 2, &[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(condition(&p, &[None, None]).unwrap(), p);

        let full = condition(&p, &[Some(1), Some(0)]).unwrap();
        assert_eq!(full.alphabet().num_positions(), 0);
        assert_eq!(full.probs(), &[1.0]);

        let given_second = condition(&p, &[None, Some(1)]).unwrap();
        assert!((given_second.probs()[0] - 0.2 / 0.6).abs() < 1e-15);

        let sparse = table(2, 2, &[0.5, 0.5, 0.0, 0.0]);
        assert!(matches!(
            condition(&sparse, &[Some(1), None]),
            Err(Error::ZeroEvidence)
        ));
    }

    #[test]
    fn positive_floors_and_renormalizes() {
        let p = table(1, 2, &[1.0, 0.0]).positive();
        assert!(p.is_positive());
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn json_document_has_versioned_shape() {
        let p = table(1, 3, &[1.0, 2.0, 3.0]);
        let text = p.to_json().unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["version"], 1);
        assert_eq!(value["N"], 1);
        assert_eq!(value["C"], 3);
        assert!(JointTable::from_json(&text.replace("\"version\": 1", "\"version\": 9")).is_err());
    }

    #[test]
    fn partition_from_tokens() {
        let part = IndexPartition::from_tokens(&[2, 0, 2, 1], 2);
        assert_eq!(part.masked(), &[0, 2]);
        assert_eq!(part.unmasked(), &[1, 3]);
        assert!(part.is_masked(2) && !part.is_masked(1));
        assert!(IndexPartition::new(3, &[0, 0]).is_err());
    }
}
