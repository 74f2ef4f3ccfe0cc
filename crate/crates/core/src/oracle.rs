//! Independent reference computations and random instance generators.
//!
//! Nothing here is used by the production paths; these are slow, plain
//! implementations that tests and `verify` compare the real code against.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::Result;
use crate::iproj::FactorMatrix;
use crate::table::{Alphabet, JointTable, MarginalSet};

/// Entropy by a plain loop over cells.
pub fn naive_entropy(p: &JointTable) -> f64 {
    let mut h = 0.0;
    for &x in p.probs() {
        if x > 0.0 {
            h -= x * x.ln();
        }
    }
    h
}

/// Entropy as `-log prod_x p(x)^p(x)`.
pub fn linear_entropy(p: &JointTable) -> f64 {
    -p.probs()
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x.powf(x))
        .product::<f64>()
        .ln()
}

/// KL divergence by a plain loop; `None` on a support violation.
pub fn naive_kl(p: &JointTable, q: &JointTable) -> Option<f64> {
    let mut d = 0.0;
    for (&a, &b) in p.probs().iter().zip(q.probs()) {
        if a > 0.0 {
            if b <= 0.0 {
                return None;
            }
            d += a * (a / b).ln();
        }
    }
    Some(d)
}

/// KL as `log prod_x (p(x) / q(x))^p(x)`.
pub fn linear_kl(p: &JointTable, q: &JointTable) -> f64 {
    p.probs()
        .iter()
        .zip(q.probs())
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| (a / b).powf(a))
        .product::<f64>()
        .ln()
}

/// Marginals by decoding every state.
pub fn naive_marginals(p: &JointTable) -> Vec<Vec<f64>> {
    let a = p.alphabet();
    let mut rows = vec![vec![0.0; a.num_categories()]; a.num_positions()];
    for (k, &x) in p.probs().iter().enumerate() {
        for (i, c) in a.decode(k).into_iter().enumerate() {
            rows[i][c] += x;
        }
    }
    rows
}

/// Conditioning by filtering and renormalizing, returned over the full
/// alphabet (cells that disagree with the evidence are zero).
pub fn filter_condition(p: &JointTable, evidence: &[Option<usize>]) -> Option<Vec<f64>> {
    let a = p.alphabet();
    let kept: Vec<f64> = p
        .probs()
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let tokens = a.decode(k);
            if evidence
                .iter()
                .zip(&tokens)
                .all(|(e, &t)| e.is_none_or(|v| v == t))
            {
                x
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = kept.iter().sum();
    (total > 0.0).then(|| kept.into_iter().map(|x| x / total).collect())
}

/// Dirichlet(`concentration`) draw over every cell of `alphabet`, floored
/// so the table is strictly positive.
pub fn random_table<R: Rng + ?Sized>(
    alphabet: Alphabet,
    concentration: f64,
    rng: &mut R,
) -> JointTable {
    let gamma = Gamma::new(concentration, 1.0).expect("positive concentration");
    let weights = (0..alphabet.num_states())
        .map(|_| gamma.sample(rng).max(1e-300))
        .collect();
    JointTable::from_weights(alphabet, weights)
        .expect("gamma weights are positive")
        .positive()
}

/// Random data-only marginal rows with the given concentration.
pub fn random_marginals<R: Rng + ?Sized>(
    num_positions: usize,
    num_categories: usize,
    concentration: f64,
    rng: &mut R,
) -> MarginalSet {
    let gamma = Gamma::new(concentration, 1.0).expect("positive concentration");
    let rows = (0..num_positions)
        .map(|_| {
            let row: Vec<f64> = (0..num_categories)
                .map(|_| gamma.sample(rng).max(1e-12))
                .collect();
            let total: f64 = row.iter().sum();
            row.into_iter().map(|x| x / total).collect()
        })
        .collect();
    MarginalSet::new(rows, false).expect("positive rows")
}

/// Factor matrix with entries uniform in `[-scale, scale]`.
pub fn random_factors<R: Rng + ?Sized>(
    num_positions: usize,
    num_categories: usize,
    scale: f64,
    rng: &mut R,
) -> FactorMatrix {
    let rows = (0..num_positions)
        .map(|_| {
            (0..num_categories)
                .map(|_| rng.random_range(-scale..=scale))
                .collect()
        })
        .collect();
    FactorMatrix::from_rows(rows, 1.0).expect("finite entries")
}

/// Result of [`gradient_projection`].
#[derive(Clone, Debug)]
pub struct GradientSolve {
    pub table: JointTable,
    pub factors: Vec<Vec<f64>>,
    pub iterations: usize,
    pub gradient_norm: f64,
}

/// Minimizes the projection objective
/// `sum_x p_est(x) exp(sum_i V[i, x_i]) - sum_{i,c} V[i, c] target_i(c)`
/// by accelerated gradient descent with backtracking and adaptive restart.
/// Shares no code with the block-update solver.
pub fn gradient_projection(
    p_est: &JointTable,
    target: &MarginalSet,
    grad_tol: f64,
    max_iter: usize,
) -> Result<GradientSolve> {
    let a = p_est.alphabet();
    let n = a.num_positions();
    let c = a.num_categories();
    let states: Vec<Vec<usize>> = a.states().collect();
    let log_p: Vec<f64> = p_est.probs().iter().map(|&x| x.ln()).collect();

    let eval = |v: &[f64]| -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; n * c];
        let mut value = 0.0;
        for (s, lp) in states.iter().zip(&log_p) {
            let w = (lp
                + s.iter()
                    .enumerate()
                    .map(|(i, &x)| v[i * c + x])
                    .sum::<f64>())
            .exp();
            value += w;
            for (i, &x) in s.iter().enumerate() {
                grad[i * c + x] += w;
            }
        }
        for i in 0..n {
            for x in 0..c {
                let t = target.row(i)[x];
                value -= v[i * c + x] * t;
                grad[i * c + x] -= t;
            }
        }
        (value, grad)
    };
    let max_norm = |g: &[f64]| g.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    let mut x = vec![0.0; n * c];
    let mut y = x.clone();
    let mut momentum = 1.0f64;
    let mut step = 1.0 / n as f64;
    let (mut fx, mut gx) = eval(&x);
    let mut iterations = 0;
    while max_norm(&gx) > grad_tol && iterations < max_iter {
        iterations += 1;
        let (fy, gy) = eval(&y);
        let g2: f64 = gy.iter().map(|g| g * g).sum();
        // Below this predicted decrease, function values carry no signal and
        // the step is frozen; restarts then use the gradient test instead.
        let precise = 0.5 * step * g2 > 1e-13 * fy.abs().max(1.0);
        let (cand, fc, gc) = loop {
            let cand: Vec<f64> = y.iter().zip(&gy).map(|(a, g)| a - step * g).collect();
            let (fc, gc) = eval(&cand);
            if !precise || fc <= fy - 0.5 * step * g2 || step < 1e-12 {
                break (cand, fc, gc);
            }
            step *= 0.5;
        };
        let uphill = if precise {
            fc > fx
        } else {
            gc.iter()
                .zip(cand.iter().zip(&x))
                .map(|(g, (a, b))| g * (a - b))
                .sum::<f64>()
                > 0.0
        };
        if uphill {
            if !precise && momentum == 1.0 {
                step *= 0.5;
            }
            momentum = 1.0;
            y = x.clone();
            continue;
        }
        let next_momentum = (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0;
        let beta = (momentum - 1.0) / next_momentum;
        y = cand
            .iter()
            .zip(&x)
            .map(|(a, b)| a + beta * (a - b))
            .collect();
        x = cand;
        fx = fc;
        gx = gc;
        momentum = next_momentum;
        if precise {
            step *= 1.1;
        }
    }

    let log_weights: Vec<f64> = states
        .iter()
        .zip(&log_p)
        .map(|(s, lp)| {
            lp + s
                .iter()
                .enumerate()
                .map(|(i, &v)| x[i * c + v])
                .sum::<f64>()
        })
        .collect();
    let (table, _) = JointTable::from_log_weights(a, &log_weights)?;
    Ok(GradientSolve {
        table,
        factors: x.chunks(c).map(<[f64]>::to_vec).collect(),
        iterations,
        gradient_norm: max_norm(&gx),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gradient_solver_hits_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Alphabet::new(3, 3).unwrap();
        let p = random_table(a, 1.0, &mut rng);
        let target = random_marginals(3, 3, 2.0, &mut rng);
        let solve = gradient_projection(&p, &target, 1e-12, 200_000).unwrap();
        assert!(solve.gradient_norm <= 1e-12, "{}", solve.gradient_norm);
        let m = naive_marginals(&solve.table);
        for i in 0..3 {
            for c in 0..3 {
                assert!((m[i][c] - target.row(i)[c]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn linear_and_loop_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = Alphabet::new(2, 3).unwrap();
        let p = random_table(a, 1.0, &mut rng);
        let q = random_table(a, 1.0, &mut rng);
        assert!((naive_entropy(&p) - linear_entropy(&p)).abs() < 1e-10);
        assert!((naive_kl(&p, &q).unwrap() - linear_kl(&p, &q)).abs() < 1e-10);
    }
}
