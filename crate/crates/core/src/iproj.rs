//! Information projection onto fixed univariate marginals.
//!
//! The projection of a positive table `p_est` onto the set of tables with
//! marginals `target` has the form `p_est(x) * prod_i exp(V[i, x_i])`, where
//! `V` minimizes the convex objective
//!
//! ```text
//! L(V) = sum_x p_est(x) prod_i exp(V[i, x_i]) - sum_{i,c} V[i, c] target_i(c)
//! ```
//!
//! Each row of `V` has a closed-form block minimizer, so cyclic block
//! updates (iterative proportional fitting, i.e. multidimensional matrix
//! scaling) solve it. The fused sampler only uses the one-shot row rules
//! [`rankwise_update`] and [`dcd_factors`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{univariate_marginals, JointTable, MarginalSet};

/// Rows are floored at this before taking logs.
pub const ROW_FLOOR: f64 = 1e-12;
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Per-position, per-category log scaling factors.
///
/// `beta` multiplies every entry at application time, so one matrix can be
/// reused across several scalings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorMatrix {
    values: Vec<Vec<f64>>,
    beta: f64,
}

impl FactorMatrix {
    pub fn zeros(num_positions: usize, num_categories: usize) -> Self {
        Self {
            values: vec![vec![0.0; num_categories]; num_positions],
            beta: 1.0,
        }
    }

    pub fn from_rows(values: Vec<Vec<f64>>, beta: f64) -> Result<Self> {
        let width = values.first().map(Vec::len).unwrap_or(0);
        if values.is_empty() || values.iter().any(|r| r.len() != width) {
            return Err(Error::ShapeMismatch(
                "factor rows must be non-empty and equal width".into(),
            ));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProbability {
                index: 0,
                value: f64::NAN,
            });
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::Config(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { values, beta })
    }

    pub fn num_positions(&self) -> usize {
        self.values.len()
    }

    pub fn num_categories(&self) -> usize {
        self.values[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    /// `beta * V[i, c]`.
    pub fn effective(&self, i: usize, c: usize) -> f64 {
        self.beta * self.values[i][c]
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Shifts rows by constants that sum to zero so every row has the same
    /// mean. Such shifts leave `p_est * exp(V)` untouched (unnormalized), so
    /// the objective and its minimizers are unchanged.
    pub fn canonicalize(&mut self) {
        let means: Vec<f64> = self
            .values
            .iter()
            .map(|r| r.iter().sum::<f64>() / r.len() as f64)
            .collect();
        let common = means.iter().sum::<f64>() / means.len() as f64;
        for (row, m) in self.values.iter_mut().zip(&means) {
            row.iter_mut().for_each(|v| *v += common - m);
        }
    }

    fn log_factor(&self, tokens: &[usize]) -> f64 {
        tokens
            .iter()
            .enumerate()
            .map(|(i, &c)| self.effective(i, c))
            .sum()
    }
}

fn check_shapes(p: &JointTable, v: &FactorMatrix) -> Result<()> {
    let a = p.alphabet();
    if v.num_positions() != a.num_positions() || v.num_categories() != a.num_categories() {
        return Err(Error::ShapeMismatch(format!(
            "factor matrix is {}x{}, table is {}x{}",
            v.num_positions(),
            v.num_categories(),
            a.num_positions(),
            a.num_categories()
        )));
    }
    Ok(())
}

/// `p(x) ∝ p_est(x) prod_i exp(beta V[i, x_i])`, normalized in the log
/// domain. Returns the table and the log normalizer.
pub fn apply_factors(p_est: &JointTable, v: &FactorMatrix) -> Result<(JointTable, f64)> {
    check_shapes(p_est, v)?;
    let a = p_est.alphabet();
    let mut tokens = vec![0; a.num_positions()];
    let log_weights: Vec<f64> = p_est
        .probs()
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            a.decode_into(k, &mut tokens);
            p.ln() + v.log_factor(&tokens)
        })
        .collect();
    JointTable::from_log_weights(a, &log_weights)
}

fn check_target(p_est: &JointTable, target: &MarginalSet) -> Result<()> {
    let a = p_est.alphabet();
    if target.includes_mask()
        || target.num_positions() != a.num_positions()
        || target.width() != a.num_categories()
    {
        return Err(Error::ShapeMismatch(
            "target marginals do not match the table".into(),
        ));
    }
    Ok(())
}

/// Unnormalized per-position marginals of `p_est * exp(beta V)`.
fn scaled_marginals(p_est: &JointTable, v: &FactorMatrix) -> Vec<Vec<f64>> {
    let a = p_est.alphabet();
    let mut rows = vec![vec![0.0; a.num_categories()]; a.num_positions()];
    let mut tokens = vec![0; a.num_positions()];
    for (k, &p) in p_est.probs().iter().enumerate() {
        a.decode_into(k, &mut tokens);
        let w = p * v.log_factor(&tokens).exp();
        for (row, &c) in rows.iter_mut().zip(&tokens) {
            row[c] += w;
        }
    }
    rows
}

/// The convex objective, evaluated at the effective factors `beta * V`.
pub fn objective(v: &FactorMatrix, p_est: &JointTable, target: &MarginalSet) -> Result<f64> {
    check_shapes(p_est, v)?;
    check_target(p_est, target)?;
    let a = p_est.alphabet();
    let mut tokens = vec![0; a.num_positions()];
    let mass: f64 = p_est
        .probs()
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            a.decode_into(k, &mut tokens);
            p * v.log_factor(&tokens).exp()
        })
        .sum();
    let linear: f64 = (0..a.num_positions())
        .flat_map(|i| (0..a.num_categories()).map(move |c| (i, c)))
        .map(|(i, c)| v.effective(i, c) * target.row(i)[c])
        .sum();
    Ok(mass - linear)
}

/// Partial derivatives of [`objective`] with respect to the effective
/// factors: unnormalized marginal minus target.
pub fn objective_gradient(
    v: &FactorMatrix,
    p_est: &JointTable,
    target: &MarginalSet,
) -> Result<Vec<Vec<f64>>> {
    check_shapes(p_est, v)?;
    check_target(p_est, target)?;
    let mut rows = scaled_marginals(p_est, v);
    for (i, row) in rows.iter_mut().enumerate() {
        for (c, g) in row.iter_mut().enumerate() {
            *g -= target.row(i)[c];
        }
    }
    Ok(rows)
}

/// Outcome of [`iproject_exact`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IprojReport {
    pub iterations: usize,
    pub max_marginal_gap: f64,
    pub objective: f64,
    pub converged: bool,
    /// Objective after each sweep, starting from `V = 0`.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

impl IprojReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Floors a marginal set at [`ROW_FLOOR`] and renormalizes each row.
pub fn floor_rows(m: &MarginalSet) -> MarginalSet {
    let rows = m
        .rows()
        .iter()
        .map(|row| {
            let floored: Vec<f64> = row.iter().map(|p| p.max(ROW_FLOOR)).collect();
            let total: f64 = floored.iter().sum();
            floored.into_iter().map(|p| p / total).collect()
        })
        .collect();
    MarginalSet::new(rows, m.includes_mask()).expect("floored rows are distributions")
}

fn max_gap(p: &JointTable, target: &MarginalSet) -> f64 {
    univariate_marginals(p).max_abs_diff(target)
}

/// Exact I-projection of `p_est` onto the tables with marginals `target`,
/// by cyclic block updates `V[i, c] += log(target_i(c) / m_i(c))` with `m`
/// the current unnormalized marginals.
///
/// Stops once the largest marginal gap is at most `tol` or after
/// `max_iter` sweeps; the report says which. The returned matrix is
/// canonicalized (equal row means) and has `beta = 1`.
pub fn iproject_exact(
    p_est: &JointTable,
    target: &MarginalSet,
    tol: f64,
    max_iter: usize,
) -> Result<(FactorMatrix, IprojReport)> {
    check_target(p_est, target)?;
    if !p_est.is_positive() {
        return Err(Error::Unsupported(
            "I-projection needs a strictly positive table".into(),
        ));
    }
    let target = floor_rows(target);
    let a = p_est.alphabet();
    let n = a.num_positions();
    let c = a.num_categories();
    let mut v = FactorMatrix::zeros(n, c);
    let mut weights = p_est.probs().to_vec();
    let mut tokens = vec![0; n];
    let mut trace = vec![objective(&v, p_est, &target)?];

    let mut iterations = 0;
    let mut gap = max_gap(p_est, &target);
    while gap > tol && iterations < max_iter {
        for i in 0..n {
            let mut m = vec![0.0; c];
            for (k, &w) in weights.iter().enumerate() {
                a.decode_into(k, &mut tokens);
                m[tokens[i]] += w;
            }
            let ratio: Vec<f64> = (0..c).map(|x| target.row(i)[x] / m[x]).collect();
            for x in 0..c {
                v.values[i][x] += ratio[x].ln();
            }
            for (k, w) in weights.iter_mut().enumerate() {
                a.decode_into(k, &mut tokens);
                *w *= ratio[tokens[i]];
            }
        }
        iterations += 1;
        trace.push(objective(&v, p_est, &target)?);
        let (current, _) = apply_factors(p_est, &v)?;
        gap = max_gap(&current, &target);
    }

    v.canonicalize();
    let (projected, _) = apply_factors(p_est, &v)?;
    let max_marginal_gap = max_gap(&projected, &target);
    let report = IprojReport {
        iterations,
        max_marginal_gap,
        objective: objective(&v, p_est, &target)?,
        converged: max_marginal_gap <= tol,
        objective_trace: trace,
    };
    Ok((v, report))
}

/// Optimal single-row factor when every other row is zero:
/// `log p_dm(c) - log p_copula(c)`.
pub fn rankwise_update(dm_row: &[f64], copula_row: &[f64]) -> Result<Vec<f64>> {
    if dm_row.len() != copula_row.len() {
        return Err(Error::ShapeMismatch("rows differ in width".into()));
    }
    Ok(dm_row
        .iter()
        .zip(copula_row)
        .map(|(&a, &b)| a.max(ROW_FLOOR).ln() - b.max(ROW_FLOOR).ln())
        .collect())
}

/// Fused factors: `V[i, c] = log full_i(c) - log causal_i(c)`, where `full`
/// conditions on every unmasked token and `causal` only on those left of `i`.
pub fn dcd_factors(full: &MarginalSet, causal: &MarginalSet, beta: f64) -> Result<FactorMatrix> {
    if full.includes_mask() || causal.includes_mask() {
        return Err(Error::ShapeMismatch(
            "fused factors take data-only marginals".into(),
        ));
    }
    if full.num_positions() != causal.num_positions() || full.width() != causal.width() {
        return Err(Error::ShapeMismatch(
            "full and causal marginals differ in shape".into(),
        ));
    }
    let rows = full
        .rows()
        .iter()
        .zip(causal.rows())
        .map(|(f, c)| rankwise_update(f, c))
        .collect::<Result<Vec<_>>>()?;
    FactorMatrix::from_rows(rows, beta)
}
