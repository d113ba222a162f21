//! Conjugate cluster likelihoods with the cluster parameters integrated out.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{ln_beta, ln_choose, ln_gamma};

/// A likelihood whose per-cluster marginal is available in closed form
/// through additive sufficient statistics.
pub trait ConjugateModel: Sync {
    type Obs: Sync;
    type Stats: Clone + Default + Send;

    fn add(&self, stats: &mut Self::Stats, obs: &Self::Obs);
    fn remove(&self, stats: &mut Self::Stats, obs: &Self::Obs);
    /// `ln m(cluster)`; zero for empty statistics.
    fn log_marginal(&self, stats: &Self::Stats) -> f64;
    /// `ln m(obs | cluster)`; the prior predictive for empty statistics.
    fn log_predictive(&self, stats: &Self::Stats, obs: &Self::Obs) -> f64;

    fn stats_of<'a, I>(&self, items: I) -> Self::Stats
    where
        I: IntoIterator<Item = &'a Self::Obs>,
        Self::Obs: 'a,
    {
        let mut s = Self::Stats::default();
        for obs in items {
            self.add(&mut s, obs);
        }
        s
    }
}

/// `y | μ, σ² ~ N(μ, σ²)` with `μ | σ² ~ N(mu0, c σ²)` and
/// `1/σ² ~ Gamma(a/2, rate b/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalModelConfig {
    pub mu0: f64,
    pub c: f64,
    pub a: f64,
    pub b: f64,
}

impl Default for NormalModelConfig {
    fn default() -> Self {
        Self {
            mu0: 0.0,
            c: 10.0,
            a: 4.0,
            b: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NormalStats {
    pub count: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

/// Posterior normal-gamma parameters `(κ, μ, α, β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalGammaPosterior {
    pub kappa: f64,
    pub mean: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl NormalModelConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.mu0.is_finite()
            && [self.c, self.a, self.b]
                .iter()
                .all(|v| v.is_finite() && *v > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "normal model needs finite mu0 and c, a, b > 0, got {self:?}"
            )))
        }
    }

    pub fn posterior(&self, s: &NormalStats) -> NormalGammaPosterior {
        let kappa0 = 1.0 / self.c;
        let m = s.count as f64;
        let kappa = kappa0 + m;
        let mut beta = self.b / 2.0;
        if s.count > 0 {
            let mean_y = s.sum / m;
            let ss = (s.sum_sq - s.sum * mean_y).max(0.0);
            beta += 0.5 * ss + kappa0 * m * (mean_y - self.mu0).powi(2) / (2.0 * kappa);
        }
        NormalGammaPosterior {
            kappa,
            mean: (kappa0 * self.mu0 + s.sum) / kappa,
            alpha: self.a / 2.0 + m / 2.0,
            beta,
        }
    }

    /// Student-t predictive density of one new observation.
    pub fn predictive_density(&self, s: &NormalStats, y: f64) -> f64 {
        self.log_predictive(s, &y).exp()
    }
}

impl ConjugateModel for NormalModelConfig {
    type Obs = f64;
    type Stats = NormalStats;

    fn add(&self, s: &mut NormalStats, y: &f64) {
        s.count += 1;
        s.sum += y;
        s.sum_sq += y * y;
    }

    fn remove(&self, s: &mut NormalStats, y: &f64) {
        s.count -= 1;
        if s.count == 0 {
            *s = NormalStats::default();
        } else {
            s.sum -= y;
            s.sum_sq -= y * y;
        }
    }

    fn log_marginal(&self, s: &NormalStats) -> f64 {
        if s.count == 0 {
            return 0.0;
        }
        let post = self.posterior(s);
        let alpha0 = self.a / 2.0;
        let beta0 = self.b / 2.0;
        -(s.count as f64) / 2.0 * (2.0 * PI).ln()
            + 0.5 * ((1.0 / self.c) / post.kappa).ln()
            + alpha0 * beta0.ln()
            - post.alpha * post.beta.ln()
            + ln_gamma(post.alpha)
            - ln_gamma(alpha0)
    }

    fn log_predictive(&self, s: &NormalStats, y: &f64) -> f64 {
        let p = self.posterior(s);
        let nu = 2.0 * p.alpha;
        let scale2 = p.beta * (p.kappa + 1.0) / (p.alpha * p.kappa);
        let z2 = (y - p.mean).powi(2) / scale2;
        ln_gamma((nu + 1.0) / 2.0)
            - ln_gamma(nu / 2.0)
            - 0.5 * (nu * PI * scale2).ln()
            - (nu + 1.0) / 2.0 * (z2 / nu).ln_1p()
    }
}

/// `ln ∫ Π N(y_i; μ, σ²) dν(μ, 1/σ²)` for one cluster.
pub fn normal_cluster_marginal(y: &[f64], cfg: &NormalModelConfig) -> Result<f64> {
    cfg.validate()?;
    if y.is_empty() {
        return Err(Error::InvalidParameter("cluster subset is empty".into()));
    }
    Ok(cfg.log_marginal(&cfg.stats_of(y)))
}

/// One binomial response: `successes` out of `trials`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinomialObs {
    pub successes: u64,
    pub trials: u64,
}

impl BinomialObs {
    pub fn new(successes: u64, trials: u64) -> Result<Self> {
        if successes > trials {
            return Err(Error::InvalidParameter(format!(
                "{successes} successes exceed {trials} trials"
            )));
        }
        Ok(Self { successes, trials })
    }
}

/// `y_i | π ~ Bin(n_i, π)` with `π ~ Beta(alpha, beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialModelConfig {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for BinomialModelConfig {
    fn default() -> Self {
        Self {
            alpha: 0.15,
            beta: 0.85,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BinomialStats {
    pub count: usize,
    pub successes: u64,
    pub failures: u64,
    pub log_choose: f64,
}

impl BinomialModelConfig {
    pub fn validate(&self) -> Result<()> {
        if [self.alpha, self.beta]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
        {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "beta prior needs alpha, beta > 0, got {self:?}"
            )))
        }
    }
}

impl ConjugateModel for BinomialModelConfig {
    type Obs = BinomialObs;
    type Stats = BinomialStats;

    fn add(&self, s: &mut BinomialStats, o: &BinomialObs) {
        s.count += 1;
        s.successes += o.successes;
        s.failures += o.trials - o.successes;
        s.log_choose += ln_choose(o.trials, o.successes);
    }

    fn remove(&self, s: &mut BinomialStats, o: &BinomialObs) {
        s.count -= 1;
        if s.count == 0 {
            *s = BinomialStats::default();
        } else {
            s.successes -= o.successes;
            s.failures -= o.trials - o.successes;
            s.log_choose -= ln_choose(o.trials, o.successes);
        }
    }

    fn log_marginal(&self, s: &BinomialStats) -> f64 {
        if s.count == 0 {
            return 0.0;
        }
        s.log_choose
            + ln_beta(
                self.alpha + s.successes as f64,
                self.beta + s.failures as f64,
            )
            - ln_beta(self.alpha, self.beta)
    }

    fn log_predictive(&self, s: &BinomialStats, o: &BinomialObs) -> f64 {
        let a = self.alpha + s.successes as f64;
        let b = self.beta + s.failures as f64;
        ln_choose(o.trials, o.successes)
            + ln_beta(a + o.successes as f64, b + (o.trials - o.successes) as f64)
            - ln_beta(a, b)
    }
}

/// `ln[Π C(n_i, y_i) · B(α + Σy, β + Σ(n − y)) / B(α, β)]` for one cluster.
pub fn binomial_cluster_marginal(rows: &[BinomialObs], cfg: &BinomialModelConfig) -> Result<f64> {
    cfg.validate()?;
    if rows.is_empty() {
        return Err(Error::InvalidParameter("cluster subset is empty".into()));
    }
    Ok(cfg.log_marginal(&cfg.stats_of(rows)))
}
