//! Log-space helpers and the shared equality tolerance.

/// Relative tolerance for exact-algebra comparisons.
pub const REL_TOL: f64 = 1e-9;
/// Absolute floor below which two probabilities are treated as equal.
pub const ABS_FLOOR: f64 = 1e-300;

/// `|a - b| <= max(REL_TOL * max(|a|, |b|), ABS_FLOOR)`.
pub fn approx_eq(a: f64, b: f64) -> bool {
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= (REL_TOL * scale).max(ABS_FLOOR)
}

/// [`approx_eq`] on probabilities given by their logarithms.
pub fn log_approx_eq(log_a: f64, log_b: f64) -> bool {
    if log_a == log_b {
        return true;
    }
    let hi = log_a.max(log_b);
    if hi.exp() <= ABS_FLOOR {
        return true;
    }
    let gap = (log_a - log_b).abs();
    // relative difference of the probabilities is 1 - exp(-gap)
    -(-gap).exp_m1() <= REL_TOL
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `ln Γ(x)`.
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// `ln B(a, b)`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `ln C(n, k)`.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Samples an index from unnormalized log weights.
pub fn sample_log_categorical<R: rand::Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> usize {
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_weights.iter().map(|w| (w - max).exp()).collect();
    sample_categorical(&weights, rng)
}

/// Samples an index from nonnegative unnormalized weights.
pub fn sample_categorical<R: rand::Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = i;
            if u < w {
                return i;
            }
            u -= w;
        }
    }
    last_positive
}
