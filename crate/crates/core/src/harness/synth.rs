//! Synthetic data tables.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{random_marginals, random_table};
use crate::table::{Alphabet, JointTable, MarginalSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Mixture of a product table and a Dirichlet(1) joint.
    RandomDirichlet,
    /// Mixture of the uniform table and `C` perfectly aligned "phrases".
    CorrelatedPhrases,
    /// First-order chain whose transitions blend a fixed row with a random
    /// stochastic matrix.
    MarkovChain,
}

impl SyntheticKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SyntheticKind::RandomDirichlet => "random_dirichlet",
            SyntheticKind::CorrelatedPhrases => "correlated_phrases",
            SyntheticKind::MarkovChain => "markov_chain",
        }
    }
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            SyntheticKind::RandomDirichlet,
            SyntheticKind::CorrelatedPhrases,
            SyntheticKind::MarkovChain,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| Error::Config(format!("unknown data kind {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    #[serde(rename = "N")]
    pub num_positions: usize,
    #[serde(rename = "C")]
    pub num_categories: usize,
    /// 0 gives a product table; larger values add dependence.
    pub correlation_strength: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(
        kind: SyntheticKind,
        num_positions: usize,
        num_categories: usize,
        correlation_strength: f64,
        seed: u64,
    ) -> Self {
        Self {
            kind,
            num_positions,
            num_categories,
            correlation_strength,
            seed,
        }
    }
}

/// Builds the table described by `spec`. Deterministic in `spec.seed`.
pub fn gen_data(spec: &SyntheticSpec) -> Result<JointTable> {
    let s = spec.correlation_strength;
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Config(format!(
            "correlation_strength must lie in [0, 1], got {s}"
        )));
    }
    let alphabet = Alphabet::new(spec.num_positions, spec.num_categories)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.kind {
        SyntheticKind::RandomDirichlet => {
            let product = JointTable::product(&random_marginals(
                alphabet.num_positions(),
                alphabet.num_categories(),
                1.0,
                &mut rng,
            ))?;
            let joint = random_table(alphabet, 1.0, &mut rng);
            mix(alphabet, &product, &joint, s)
        }
        SyntheticKind::CorrelatedPhrases => correlated_phrases(alphabet, s, &mut rng),
        SyntheticKind::MarkovChain => markov_chain(alphabet, s, &mut rng),
    }
}

fn mix(alphabet: Alphabet, a: &JointTable, b: &JointTable, s: f64) -> Result<JointTable> {
    let w = a
        .probs()
        .iter()
        .zip(b.probs())
        .map(|(x, y)| (1.0 - s) * x + s * y)
        .collect();
    JointTable::from_weights(alphabet, w)
}

fn correlated_phrases<R: Rng>(alphabet: Alphabet, s: f64, rng: &mut R) -> Result<JointTable> {
    let n = alphabet.num_positions();
    let c = alphabet.num_categories();
    // Phrase k puts category perms[i][k] at position i.
    let perms: Vec<Vec<usize>> = (0..n)
        .map(|_| {
            let mut p: Vec<usize> = (0..c).collect();
            p.shuffle(rng);
            p
        })
        .collect();
    let mut weights = vec![(1.0 - s) / alphabet.num_states() as f64; alphabet.num_states()];
    for k in 0..c {
        let phrase: Vec<usize> = perms.iter().map(|p| p[k]).collect();
        weights[alphabet.index_of(&phrase)] += s / c as f64;
    }
    JointTable::from_weights(alphabet, weights)
}

fn markov_chain<R: Rng>(alphabet: Alphabet, s: f64, rng: &mut R) -> Result<JointTable> {
    let n = alphabet.num_positions();
    let c = alphabet.num_categories();
    let rows = random_marginals(2, c, 1.0, rng);
    let (initial, shared) = (rows.row(0).to_vec(), rows.row(1).to_vec());
    let sticky = random_marginals(c, c, 0.5, rng);
    let transition: Vec<Vec<f64>> = (0..c)
        .map(|a| {
            (0..c)
                .map(|b| (1.0 - s) * shared[b] + s * sticky.row(a)[b])
                .collect()
        })
        .collect();
    let weights = alphabet
        .states()
        .map(|x| {
            let mut p = initial[x[0]];
            for i in 1..n {
                p *= transition[x[i - 1]][x[i]];
            }
            p
        })
        .collect();
    JointTable::from_weights(alphabet, weights)
}

/// Product table with the given rows.
pub fn product_data(rows: Vec<Vec<f64>>) -> Result<JointTable> {
    JointTable::product(&MarginalSet::new(rows, false)?)
}

/// Draws `count` sequences from `table` with a seeded stream.
pub fn sample_corpus(table: &JointTable, count: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = table.alphabet();
    let mut cdf = Vec::with_capacity(a.num_states());
    let mut acc = 0.0;
    for &p in table.probs() {
        acc += p;
        cdf.push(acc);
    }
    (0..count)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * acc;
            let k = cdf.partition_point(|&c| c <= u).min(a.num_states() - 1);
            a.decode(k)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::total_correlation;

    #[test]
    fn zero_strength_is_independent() {
        for kind in [
            SyntheticKind::RandomDirichlet,
            SyntheticKind::CorrelatedPhrases,
            SyntheticKind::MarkovChain,
        ] {
            let p = gen_data(&SyntheticSpec::new(kind, 3, 3, 0.0, 11)).unwrap();
            assert!(total_correlation(&p) < 1e-10, "{kind}");
        }
    }

    #[test]
    fn perfect_phrases_on_a_pair() {
        let p = gen_data(&SyntheticSpec::new(
            SyntheticKind::CorrelatedPhrases,
            2,
            2,
            1.0,
            0,
        ))
        .unwrap();
        assert!((total_correlation(&p) - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn phrase_dependence_grows_with_strength() {
        let tc: Vec<f64> = [0.0, 0.3, 0.6, 0.9]
            .iter()
            .map(|&s| {
                total_correlation(
                    &gen_data(&SyntheticSpec::new(
                        SyntheticKind::CorrelatedPhrases,
                        3,
                        3,
                        s,
                        4,
                    ))
                    .unwrap(),
                )
            })
            .collect();
        assert!(tc.windows(2).all(|w| w[0] < w[1]), "{tc:?}");
    }

    #[test]
    fn same_seed_same_table() {
        let spec = SyntheticSpec::new(SyntheticKind::MarkovChain, 4, 2, 0.7, 9);
        assert_eq!(gen_data(&spec).unwrap(), gen_data(&spec).unwrap());
    }

    #[test]
    fn bad_strength_is_a_config_error() {
        let spec = SyntheticSpec::new(SyntheticKind::CorrelatedPhrases, 2, 2, 1.5, 0);
        assert!(matches!(gen_data(&spec), Err(Error::Config(_))));
    }
}
