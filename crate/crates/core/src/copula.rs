//! Conditional odds ratios of binary tables.
//!
//! For a subset `A` of positions and a fixed assignment `b` to the rest,
//! the ratio multiplies the cells whose `A`-part has the same parity as
//! `|A|` and divides by the others. The collection over all `|A| >= 2`
//! and all `b` is the table's copula: it is unchanged by per-position
//! rescaling and, together with the univariate marginals, pins the table
//! down uniquely.

use crate::error::{Error, Result};
use crate::table::JointTable;

fn require_binary(p: &JointTable) -> Result<()> {
    if p.alphabet().num_categories() != 2 {
        return Err(Error::Unsupported(
            "odds ratios are only implemented for binary categories".into(),
        ));
    }
    Ok(())
}

/// Log of the conditional odds ratio of `subset` given `rest` (the values of
/// the complementary positions in ascending position order).
pub fn log_conditional_odds_ratio(p: &JointTable, subset: &[usize], rest: &[usize]) -> Result<f64> {
    require_binary(p)?;
    let n = p.alphabet().num_positions();
    let mut in_subset = vec![false; n];
    for &i in subset {
        if i >= n || in_subset[i] {
            return Err(Error::InvalidState(format!("bad subset index {i}")));
        }
        in_subset[i] = true;
    }
    if subset.len() < 2 {
        return Err(Error::InvalidState(
            "odds ratio needs at least two positions".into(),
        ));
    }
    let complement: Vec<usize> = (0..n).filter(|&i| !in_subset[i]).collect();
    if rest.len() != complement.len() || rest.iter().any(|&v| v > 1) {
        return Err(Error::ShapeMismatch(
            "assignment to the complement has the wrong shape".into(),
        ));
    }

    let mut tokens = vec![0; n];
    for (&i, &v) in complement.iter().zip(rest) {
        tokens[i] = v;
    }
    let target_parity = subset.len() % 2;
    let mut log_ratio = 0.0;
    for bits in 0..(1usize << subset.len()) {
        for (k, &i) in subset.iter().enumerate() {
            tokens[i] = (bits >> k) & 1;
        }
        let cell = p.prob(&tokens);
        if !(cell > 0.0) {
            return Err(Error::Unsupported(
                "odds ratios need a strictly positive table".into(),
            ));
        }
        if bits.count_ones() as usize % 2 == target_parity {
            log_ratio += cell.ln();
        } else {
            log_ratio -= cell.ln();
        }
    }
    Ok(log_ratio)
}

pub fn conditional_odds_ratio(p: &JointTable, subset: &[usize], rest: &[usize]) -> Result<f64> {
    log_conditional_odds_ratio(p, subset, rest).map(f64::exp)
}

/// Every conditional log odds ratio of `p`, in a fixed order: subsets by
/// bitmask, then complement assignments by bitmask.
pub fn all_log_odds_ratios(p: &JointTable) -> Result<Vec<f64>> {
    require_binary(p)?;
    let n = p.alphabet().num_positions();
    let mut out = Vec::new();
    for mask in 0..(1usize << n) {
        if mask.count_ones() < 2 {
            continue;
        }
        let subset: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        let others = n - subset.len();
        for bits in 0..(1usize << others) {
            let rest: Vec<usize> = (0..others).map(|k| (bits >> k) & 1).collect();
            out.push(log_conditional_odds_ratio(p, &subset, &rest)?);
        }
    }
    Ok(out)
}

/// True when every conditional odds ratio of `p` and `q` agrees to
/// relative tolerance `tol`.
pub fn same_copula(p: &JointTable, q: &JointTable, tol: f64) -> bool {
    if p.alphabet() != q.alphabet() {
        return false;
    }
    match (all_log_odds_ratios(p), all_log_odds_ratios(q)) {
        (Ok(a), Ok(b)) => a
            .iter()
            .zip(&b)
            .all(|(x, y)| -(-(x - y).abs()).exp_m1() <= tol),
        _ => false,
    }
}
