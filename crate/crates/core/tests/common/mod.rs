//! Independent oracles shared by the integration tests. Nothing here calls
//! the closed forms under test.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;

use species_sampling::mcmc::{BinomialModelConfig, BinomialObs, NormalModelConfig};
use species_sampling::Composition;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

fn log_sum(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// `ln` of a trapezoid rule with uniform step `h` over log-scale values.
fn log_trapezoid(log_values: &[f64], h: f64) -> f64 {
    let mut t = log_values.to_vec();
    let last = t.len() - 1;
    t[0] -= 2f64.ln();
    t[last] -= 2f64.ln();
    log_sum(&t) + h.ln()
}

fn log_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * PI * var).ln() - (x - mean).powi(2) / (2.0 * var)
}

/// Log joint density of `y` and `(μ, τ = 1/σ²)` under the normal-gamma
/// prior, by direct multiplication of densities.
fn normal_log_joint(y: &[f64], mu: f64, tau: f64, cfg: &NormalModelConfig) -> f64 {
    let (shape, rate) = (cfg.a / 2.0, cfg.b / 2.0);
    let log_gamma_pdf = shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * tau.ln() - rate * tau;
    let log_prior_mu = log_normal_pdf(mu, cfg.mu0, cfg.c / tau);
    let log_lik: f64 = y.iter().map(|&yi| log_normal_pdf(yi, mu, 1.0 / tau)).sum();
    log_lik + log_prior_mu + log_gamma_pdf
}

/// `ln ∫∫ p(y, μ, τ) dμ dτ` by nested trapezoid rules: the outer one in
/// `t = ln τ`, the inner one over `μ` on a window sized by the conditional
/// spread of `μ` at that `τ`.
pub fn normal_marginal_quadrature(y: &[f64], cfg: &NormalModelConfig) -> f64 {
    let m = y.len() as f64;
    let center = (cfg.mu0 / cfg.c + y.iter().sum::<f64>()) / (1.0 / cfg.c + m);
    let inner = |t: f64| {
        let tau = t.exp();
        let sd = 1.0 / (tau * (m + 1.0 / cfg.c)).sqrt();
        let points = 801;
        let h = 24.0 * sd / (points - 1) as f64;
        let vals: Vec<f64> = (0..points)
            .map(|i| normal_log_joint(y, center - 12.0 * sd + h * i as f64, tau, cfg))
            .collect();
        log_trapezoid(&vals, h) + t
    };
    // locate the bulk on a coarse grid, then integrate finely around it
    let coarse: Vec<(f64, f64)> = (0..=600)
        .map(|i| {
            let t = -30.0 + 0.1 * i as f64;
            (t, inner(t))
        })
        .collect();
    let peak = coarse.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let live: Vec<f64> = coarse
        .iter()
        .filter(|c| c.1 > peak - 60.0)
        .map(|c| c.0)
        .collect();
    let (lo, hi) = (live[0] - 0.5, live[live.len() - 1] + 0.5);
    let points = 4001;
    let h = (hi - lo) / (points - 1) as f64;
    let vals: Vec<f64> = (0..points).map(|i| inner(lo + h * i as f64)).collect();
    log_trapezoid(&vals, h)
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn ln_binomial(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `ln ∫_0^1 Π Bin(y_i; n_i, π) Beta(π; α, β) dπ` by tanh-sinh quadrature,
/// which absorbs the endpoint singularities of small `α`, `β`.
pub fn binomial_marginal_quadrature(rows: &[BinomialObs], cfg: &BinomialModelConfig) -> f64 {
    let s: f64 = rows.iter().map(|r| r.successes as f64).sum();
    let f: f64 = rows.iter().map(|r| (r.trials - r.successes) as f64).sum();
    let log_choose: f64 = rows
        .iter()
        .map(|r| ln_binomial(r.trials, r.successes))
        .sum();
    let log_beta_fn = ln_gamma(cfg.alpha) + ln_gamma(cfg.beta) - ln_gamma(cfg.alpha + cfg.beta);
    let h = 1.0 / 256.0;
    let half_width = 6.5;
    let steps = (half_width / h) as i64;
    let vals: Vec<f64> = (-steps..=steps)
        .map(|i| {
            let u = h * i as f64;
            let z = PI * u.sinh();
            let ln_x = -softplus(-z);
            let ln_1mx = -softplus(z);
            // x = sigmoid(π·sinh u), so dx/du = π·cosh(u)·x·(1 − x)
            let ln_jac = (PI * u.cosh()).ln() + ln_x + ln_1mx;
            (cfg.alpha - 1.0 + s) * ln_x + (cfg.beta - 1.0 + f) * ln_1mx + ln_jac
        })
        .collect();
    log_sum(&vals) + h.ln() + log_choose - log_beta_fn
}

/// Every set partition of `{0, …, n−1}` as restricted growth labels.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let max = prefix.iter().copied().max().unwrap_or(0);
        for s in 1..=max + 1 {
            prefix.push(s);
            grow(prefix, n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut Vec::new(), n, &mut out);
    out
}

/// Order-of-appearance cluster sizes of a restricted growth labeling.
pub fn sizes_of(labels: &[usize]) -> Vec<usize> {
    let k = labels.iter().copied().max().unwrap_or(0);
    let mut sizes = vec![0; k];
    for &l in labels {
        sizes[l - 1] += 1;
    }
    sizes
}

/// Dirichlet process probability of one specific partition, by the
/// sequential Chinese restaurant product rather than a closed form.
pub fn crp_partition_probability(labels: &[usize], theta: f64) -> f64 {
    let mut sizes: Vec<usize> = Vec::new();
    let mut p = 1.0;
    for (i, &l) in labels.iter().enumerate() {
        let denom = i as f64 + theta;
        if l > sizes.len() {
            if i > 0 {
                p *= theta / denom;
            }
            sizes.push(1);
        } else {
            p *= sizes[l - 1] as f64 / denom;
            sizes[l - 1] += 1;
        }
    }
    p
}

pub fn composition(sizes: &[usize]) -> Composition {
    Composition::new(sizes.to_vec()).unwrap()
}

/// Pearson chi-square goodness of fit of `observed` counts against
/// `expected` probabilities. Cells with expected probability below
/// `min_expected_count / total` are pooled into one cell. Returns
/// `(statistic, degrees of freedom, p-value)`.
pub fn chi_square_gof(
    observed: &BTreeMap<Composition, usize>,
    expected: &BTreeMap<Composition, f64>,
    min_expected_count: f64,
) -> (f64, usize, f64) {
    let total: usize = observed.values().sum();
    let total = total as f64;
    let mut stat = 0.0;
    let mut cells = 0;
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    for (c, &p) in expected {
        let o = observed.get(c).copied().unwrap_or(0) as f64;
        let e = p * total;
        if e < min_expected_count {
            pooled_obs += o;
            pooled_exp += e;
        } else {
            stat += (o - e).powi(2) / e;
            cells += 1;
        }
    }
    assert!(
        observed.keys().all(|c| expected.contains_key(c)),
        "observed a composition with no expected cell"
    );
    if pooled_exp > 0.0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
        cells += 1;
    }
    let df = cells - 1;
    let p = 1.0 - ChiSquared::new(df as f64).unwrap().cdf(stat);
    (stat, df, p)
}

fn normal(mu0: f64, c: f64, a: f64, b: f64) -> NormalModelConfig {
    NormalModelConfig { mu0, c, a, b }
}

/// Ten hyperparameter and subset combinations for the normal marginal,
/// led by the grid-data settings.
pub fn normal_cases() -> Vec<(Vec<f64>, NormalModelConfig)> {
    let reference = normal(0.0, 10.0, 4.0, 4.0);
    vec![
        (vec![0.0], reference),
        (vec![-4.0, -3.0], reference),
        (vec![-1.0, 0.0, 1.0], reference),
        ((-4..=4).map(f64::from).collect(), reference),
        (vec![2.0, 3.0, 4.0], reference),
        (vec![0.5], normal(1.0, 0.5, 2.0, 1.0)),
        (vec![-2.0, 1.5], normal(-1.0, 3.0, 6.0, 2.0)),
        (vec![0.1, 0.2, 0.15, 0.05], normal(0.0, 1.0, 1.0, 0.5)),
        (vec![10.0, 12.0], normal(0.0, 100.0, 3.0, 8.0)),
        (
            vec![-0.3, 0.7, 1.1, -2.2, 0.0],
            normal(0.5, 2.0, 10.0, 10.0),
        ),
    ]
}

fn rows(pairs: &[(u64, u64)]) -> Vec<BinomialObs> {
    pairs
        .iter()
        .map(|&(y, n)| BinomialObs::new(y, n).unwrap())
        .collect()
}

/// Ten combinations for the beta-binomial marginal, led by sarcoma subsets
/// under the Beta(0.15, 0.85) prior.
pub fn binomial_cases() -> Vec<(Vec<BinomialObs>, BinomialModelConfig)> {
    let reference = BinomialModelConfig {
        alpha: 0.15,
        beta: 0.85,
    };
    let uniform = BinomialModelConfig {
        alpha: 1.0,
        beta: 1.0,
    };
    vec![
        (rows(&[(6, 28)]), reference),
        (rows(&[(6, 28), (7, 29)]), reference),
        (rows(&[(1, 5), (1, 12)]), reference),
        (
            rows(&[
                (6, 28),
                (7, 29),
                (3, 29),
                (5, 26),
                (3, 20),
                (2, 15),
                (1, 5),
                (1, 12),
            ]),
            reference,
        ),
        (rows(&[(0, 3)]), reference),
        (rows(&[(0, 1)]), uniform),
        (rows(&[(4, 4), (2, 3)]), uniform),
        (
            rows(&[(3, 10)]),
            BinomialModelConfig {
                alpha: 2.0,
                beta: 5.0,
            },
        ),
        (
            rows(&[(0, 7), (1, 9)]),
            BinomialModelConfig {
                alpha: 0.5,
                beta: 0.5,
            },
        ),
        (
            rows(&[(12, 40), (9, 31)]),
            BinomialModelConfig {
                alpha: 3.0,
                beta: 0.4,
            },
        ),
    ]
}
