use rand::Rng;

/// `log(sum(exp(x)))` with a max shift. Empty input gives `-inf`.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Natural log after flooring at `floor`.
pub fn floored_ln(p: f64, floor: f64) -> f64 {
    p.max(floor).ln()
}

/// Normalizes nonnegative weights in place; returns the original total.
pub fn normalize(weights: &mut [f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        weights.iter_mut().for_each(|w| *w /= total);
    }
    total
}

/// Inverse-CDF draw from normalized `probs`.
///
/// One uniform is consumed per call, which keeps seeded runs aligned
/// across modes that draw the same number of tokens.
pub fn sample_categorical<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = k;
            acc += p;
            if u < acc {
                return k;
            }
        }
    }
    last_positive
}
