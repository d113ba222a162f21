//! Weight-sequence priors.
//!
//! A species sampling model is determined, as far as the partition goes, by
//! the law of its weights `P_h = u_h / Σ_i u_i`. The infinite sequence is
//! truncated once the analytic expected mass of the undrawn tail, relative
//! to what has been drawn, falls below `epsilon`; the bound is carried along
//! as [`WeightDraw::tail_mass`].

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::composition::Composition;
use crate::error::{Error, Result};
use crate::rng::{from_seed, substream};

pub const DEFAULT_EPSILON: f64 = 1e-10;
pub const DEFAULT_HARD_CAP: usize = 1_000_000;

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_hard_cap() -> usize {
    DEFAULT_HARD_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum WeightKind {
    /// `u_h = exp(X_h)`, `X_h ~ N(log(1 − 1/(1 + e^{b − a h})), σ²)`.
    /// Early weights are of similar size a priori, later ones decay
    /// geometrically at rate `e^{−a}`.
    LogisticNormal {
        a: f64,
        b: f64,
        sigma2: f64,
    },
    /// Stick breaking with `V_h ~ Beta(1, θ)`.
    DpStickBreaking {
        theta: f64,
    },
    Custom(CustomWeights),
}

/// `u_h = mean_h · ξ_h` with i.i.d. mean-one noise `ξ_h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomWeights {
    pub mean: MeanSequence,
    #[serde(default)]
    pub noise: Noise,
    /// Caller's assertion that `Σ_h E(u_h) < ∞`.
    pub certified_summable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum MeanSequence {
    /// `scale · ratio^{h−1}`.
    Geometric { scale: f64, ratio: f64 },
    /// `scale · h^{−exponent}`.
    PowerLaw { scale: f64, exponent: f64 },
    /// Finitely many atoms.
    Finite { values: Vec<f64> },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Noise {
    #[default]
    None,
    LogNormal {
        sigma2: f64,
    },
    Gamma {
        shape: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightModel {
    #[serde(flatten)]
    pub kind: WeightKind,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_hard_cap")]
    pub hard_cap: usize,
}

/// A truncated weight sequence. `weights` are in draw order `h = 1, 2, …`
/// and `Σ weights + tail_mass = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightDraw {
    pub weights: Vec<f64>,
    pub tail_mass: f64,
    pub seed: Option<u64>,
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl WeightModel {
    pub fn new(kind: WeightKind) -> Self {
        Self {
            kind,
            epsilon: DEFAULT_EPSILON,
            hard_cap: DEFAULT_HARD_CAP,
        }
    }

    pub fn logistic_normal(a: f64, b: f64, sigma2: f64) -> Self {
        Self::new(WeightKind::LogisticNormal { a, b, sigma2 })
    }

    /// The default logistic-normal prior `(a, b, σ²) = (1, 5, 1)`.
    pub fn default_logistic_normal() -> Self {
        Self::logistic_normal(1.0, 5.0, 1.0)
    }

    pub fn dp(theta: f64) -> Self {
        Self::new(WeightKind::DpStickBreaking { theta })
    }

    /// A model with a fixed finite set of weights (no noise).
    pub fn fixed(values: Vec<f64>) -> Self {
        Self::new(WeightKind::Custom(CustomWeights {
            mean: MeanSequence::Finite { values },
            noise: Noise::None,
            certified_summable: true,
        }))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1e-6) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1e-6], got {}",
                self.epsilon
            )));
        }
        if self.hard_cap == 0 {
            return Err(Error::InvalidParameter("hard_cap must be positive".into()));
        }
        match &self.kind {
            WeightKind::LogisticNormal { a, b, sigma2 } => {
                positive("a", *a)?;
                positive("b", *b)?;
                positive("sigma2", *sigma2)
            }
            WeightKind::DpStickBreaking { theta } => positive("theta", *theta),
            WeightKind::Custom(c) => {
                if !c.certified_summable {
                    return Err(Error::InvalidParameter(
                        "custom weight model must be certified summable".into(),
                    ));
                }
                match &c.mean {
                    MeanSequence::Geometric { scale, ratio } => {
                        positive("scale", *scale)?;
                        if !(*ratio > 0.0 && *ratio < 1.0) {
                            return Err(Error::InvalidParameter(format!(
                                "geometric ratio must lie in (0, 1), got {ratio}"
                            )));
                        }
                    }
                    MeanSequence::PowerLaw { scale, exponent } => {
                        positive("scale", *scale)?;
                        if exponent.is_nan() || *exponent <= 1.0 {
                            return Err(Error::InvalidParameter(format!(
                                "power-law means are not summable for exponent {exponent}"
                            )));
                        }
                    }
                    MeanSequence::Finite { values } => {
                        if values.is_empty() {
                            return Err(Error::InvalidParameter("no finite weights".into()));
                        }
                        for v in values {
                            positive("finite weight", *v)?;
                        }
                    }
                }
                match c.noise {
                    Noise::None => {}
                    Noise::LogNormal { sigma2 } => positive("sigma2", sigma2)?,
                    Noise::Gamma { shape } => positive("shape", shape)?,
                }
                // numeric summability up to the horizon
                let horizon = self.hard_cap.min(10_000);
                let partial: f64 = (1..=horizon).map(|h| self.mean_weight(h)).sum();
                if !partial.is_finite() || !self.tail_bound(horizon).is_finite() {
                    return Err(Error::InvalidParameter(
                        "custom mean sequence is not numerically summable".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Log-location of `X_h` for the logistic-normal model,
    /// `log(1 − 1/(1 + e^{b − a h}))`.
    pub fn logistic_location(a: f64, b: f64, h: usize) -> f64 {
        -softplus(a * h as f64 - b)
    }

    /// `E(u_h)` for `h ≥ 1`. For stick breaking this is `E(P_h)`.
    pub fn mean_weight(&self, h: usize) -> f64 {
        match &self.kind {
            WeightKind::LogisticNormal { a, b, sigma2 } => {
                (Self::logistic_location(*a, *b, h) + sigma2 / 2.0).exp()
            }
            WeightKind::DpStickBreaking { theta } => {
                let r = theta / (1.0 + theta);
                r.powi(h as i32 - 1) / (1.0 + theta)
            }
            WeightKind::Custom(c) => match &c.mean {
                MeanSequence::Geometric { scale, ratio } => scale * ratio.powi(h as i32 - 1),
                MeanSequence::PowerLaw { scale, exponent } => scale * (h as f64).powf(-exponent),
                MeanSequence::Finite { values } => values.get(h - 1).copied().unwrap_or(0.0),
            },
        }
    }

    /// Upper bound on `Σ_{h > drawn} E(u_h)`.
    pub fn tail_bound(&self, drawn: usize) -> f64 {
        let next = drawn as f64 + 1.0;
        match &self.kind {
            WeightKind::LogisticNormal { a, b, sigma2 } => {
                // sigmoid(b − a h) ≤ e^{b − a h}
                (sigma2 / 2.0 + b - a * next).exp() / (-(-a).exp_m1())
            }
            WeightKind::DpStickBreaking { theta } => (theta / (1.0 + theta)).powi(drawn as i32),
            WeightKind::Custom(c) => match &c.mean {
                MeanSequence::Geometric { scale, ratio } => {
                    scale * ratio.powi(drawn as i32) / (1.0 - ratio)
                }
                MeanSequence::PowerLaw { scale, exponent } => {
                    if drawn == 0 {
                        scale * (1.0 + 1.0 / (exponent - 1.0))
                    } else {
                        scale * (drawn as f64).powf(1.0 - exponent) / (exponent - 1.0)
                    }
                }
                MeanSequence::Finite { values } => values.iter().skip(drawn).sum(),
            },
        }
    }

    /// Draws a truncated weight sequence from `rng`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<WeightDraw> {
        match &self.kind {
            WeightKind::DpStickBreaking { theta } => self.draw_stick_breaking(*theta, rng),
            _ => self.draw_normalized(rng),
        }
    }

    fn draw_stick_breaking<R: Rng + ?Sized>(&self, theta: f64, rng: &mut R) -> Result<WeightDraw> {
        let mut weights = Vec::new();
        let mut remaining = 1.0f64;
        while remaining >= self.epsilon {
            if weights.len() >= self.hard_cap {
                return Err(Error::TruncationOverflow { cap: self.hard_cap });
            }
            // 1 − V ~ U^{1/θ} for V ~ Beta(1, θ)
            let log_keep = rng.random::<f64>().ln() / theta;
            let v = -log_keep.exp_m1();
            weights.push(remaining * v);
            remaining *= log_keep.exp();
        }
        let total: f64 = weights.iter().sum::<f64>() + remaining;
        for w in &mut weights {
            *w /= total;
        }
        Ok(WeightDraw {
            weights,
            tail_mass: remaining / total,
            seed: None,
        })
    }

    fn draw_normalized<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<WeightDraw> {
        let finite_len = match &self.kind {
            WeightKind::Custom(CustomWeights {
                mean: MeanSequence::Finite { values },
                ..
            }) => Some(values.len()),
            _ => None,
        };
        let mut raw = Vec::new();
        let mut sum = 0.0;
        loop {
            let h = raw.len() + 1;
            if h > self.hard_cap {
                return Err(Error::TruncationOverflow { cap: self.hard_cap });
            }
            let u = self.draw_unnormalized(h, rng);
            raw.push(u);
            sum += u;
            let tail = if finite_len == Some(h) {
                0.0
            } else {
                self.tail_bound(h)
            };
            if finite_len == Some(h) || (sum > 0.0 && tail < self.epsilon * sum) {
                let total = sum + tail;
                let weights = raw.into_iter().map(|u| u / total).collect();
                return Ok(WeightDraw {
                    weights,
                    tail_mass: tail / total,
                    seed: None,
                });
            }
        }
    }

    fn draw_unnormalized<R: Rng + ?Sized>(&self, h: usize, rng: &mut R) -> f64 {
        match &self.kind {
            WeightKind::LogisticNormal { a, b, sigma2 } => {
                let z: f64 = StandardNormal.sample(rng);
                (Self::logistic_location(*a, *b, h) + sigma2.sqrt() * z).exp()
            }
            WeightKind::Custom(c) => {
                let noise = match c.noise {
                    Noise::None => 1.0,
                    Noise::LogNormal { sigma2 } => {
                        let z: f64 = StandardNormal.sample(rng);
                        (sigma2.sqrt() * z - sigma2 / 2.0).exp()
                    }
                    Noise::Gamma { shape } => Gamma::new(shape, 1.0 / shape)
                        .expect("validated shape")
                        .sample(rng),
                };
                self.mean_weight(h) * noise
            }
            WeightKind::DpStickBreaking { .. } => unreachable!("stick breaking is drawn directly"),
        }
    }
}

/// Draws a weight sequence with the generator seeded by `seed`.
pub fn sample_weights(model: &WeightModel, seed: u64) -> Result<WeightDraw> {
    model.validate()?;
    let mut draw = model.draw(&mut from_seed(seed))?;
    draw.seed = Some(seed);
    Ok(draw)
}

impl WeightDraw {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// CSV `h,weight`; with `sorted` the weights are in decreasing order and
    /// `h` is the rank.
    pub fn write_csv<W: Write>(&self, writer: W, sorted: bool) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        w.write_record(["h", "weight"])?;
        let mut weights = self.weights.clone();
        if sorted {
            weights.sort_by(|a, b| b.total_cmp(a));
        }
        for (h, p) in weights.iter().enumerate() {
            w.write_record([(h + 1).to_string(), p.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// The first picks of a size-biased permutation of a [`WeightDraw`].
#[derive(Debug, Clone, PartialEq)]
pub struct SizeBiasedPrefix {
    /// `P̃_1, …, P̃_k`.
    pub picked: Vec<f64>,
    /// 0-based atom indices `π_j − 1` into the source draw.
    pub pick_indices: Vec<usize>,
    /// `1 − Σ picked`, computed as tail mass plus unpicked weights.
    pub remaining_mass: f64,
}

impl SizeBiasedPrefix {
    pub fn empty() -> Self {
        Self {
            picked: Vec::new(),
            pick_indices: Vec::new(),
            remaining_mass: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.picked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.picked.is_empty()
    }

    /// `1 − Σ_{i ≤ j} P̃_i` for `j ≤ len`, accumulated from the right to
    /// avoid cancellation.
    pub fn remaining_after(&self, j: usize) -> f64 {
        self.remaining_mass + self.picked[j..].iter().sum::<f64>()
    }

    /// Continues the permutation by `additional` picks from the same draw.
    pub fn extend<R: Rng + ?Sized>(
        &self,
        draw: &WeightDraw,
        additional: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let target = self.len() + additional;
        if target > draw.len() {
            return Err(Error::Exhausted {
                requested: target,
                available: draw.len(),
            });
        }
        let mut taken = vec![false; draw.len()];
        for &i in &self.pick_indices {
            taken[i] = true;
        }
        let unpicked_mass = |taken: &[bool]| -> f64 {
            draw.weights
                .iter()
                .zip(taken)
                .filter(|(_, t)| !**t)
                .map(|(w, _)| w)
                .sum()
        };
        let mut next = self.clone();
        for _ in 0..additional {
            let mut u = rng.random::<f64>() * unpicked_mass(&taken);
            let mut chosen = None;
            for (i, (&w, &t)) in draw.weights.iter().zip(&taken).enumerate() {
                if t || w <= 0.0 {
                    continue;
                }
                chosen = Some(i);
                if u < w {
                    break;
                }
                u -= w;
            }
            let i = chosen.ok_or(Error::Exhausted {
                requested: target,
                available: next.len(),
            })?;
            taken[i] = true;
            next.picked.push(draw.weights[i]);
            next.pick_indices.push(i);
        }
        next.remaining_mass = draw.tail_mass + unpicked_mass(&taken);
        Ok(next)
    }
}

/// Samples the first `k` picks of a size-biased permutation: atom `h` is
/// chosen with probability `P_h` over the unpicked finite mass.
pub fn size_biased_permutation<R: Rng + ?Sized>(
    draw: &WeightDraw,
    k: usize,
    rng: &mut R,
) -> Result<SizeBiasedPrefix> {
    SizeBiasedPrefix::empty().extend(draw, k, rng)
}

/// `log p(n | P̃) = Σ_j (n_j − 1) log P̃_j + Σ_{j<k} log(1 − Σ_{i≤j} P̃_i)`,
/// the probability of one specific order-of-appearance label sequence with
/// composition `n` given the size-biased weights.
pub fn partial_probability(n: &Composition, prefix: &SizeBiasedPrefix) -> Result<f64> {
    let k = n.k();
    if prefix.len() < k {
        return Err(Error::InsufficientPrefix {
            required: k,
            available: prefix.len(),
        });
    }
    let mut log_p = 0.0;
    for (&nj, &p) in n.sizes().iter().zip(&prefix.picked) {
        if nj > 1 {
            log_p += (nj - 1) as f64 * p.ln();
        }
    }
    let mut rest = prefix.remaining_after(k);
    for j in (1..k).rev() {
        rest += prefix.picked[j];
        log_p += rest.ln();
    }
    Ok(log_p)
}

/// `(P̃_1, …, P̃_k, 1 − Σ_{j≤k} P̃_j)`: where the next observation goes
/// given the weights of the `k` clusters seen so far.
pub fn predictive_given_weights(k: usize, prefix: &SizeBiasedPrefix) -> Result<Vec<f64>> {
    if prefix.len() < k {
        return Err(Error::InsufficientPrefix {
            required: k,
            available: prefix.len(),
        });
    }
    let mut out = prefix.picked[..k].to_vec();
    out.push(prefix.remaining_after(k));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClusterCountEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub draws: usize,
}

/// Monte Carlo estimate of `E(k_n)`: the mean number of distinct atoms hit
/// by `n` i.i.d. draws from `G`, averaged over `draws` weight sequences.
/// Mass in the truncated tail always counts as a fresh atom.
pub fn prior_expected_clusters(
    model: &WeightModel,
    n: usize,
    draws: usize,
    seed: u64,
) -> Result<ClusterCountEstimate> {
    model.validate()?;
    if n == 0 || draws == 0 {
        return Err(Error::InvalidParameter(
            "sample size and number of draws must be positive".into(),
        ));
    }
    let counts = (0..draws)
        .into_par_iter()
        .map(|l| {
            let mut rng = substream(seed, l as u64);
            let draw = model.draw(&mut rng)?;
            let mut cumulative = Vec::with_capacity(draw.len());
            let mut acc = 0.0;
            for w in &draw.weights {
                acc += w;
                cumulative.push(acc);
            }
            let mut hit = vec![false; draw.len()];
            let mut distinct = 0usize;
            for _ in 0..n {
                let u = rng.random::<f64>();
                let idx = cumulative.partition_point(|&c| c <= u);
                if idx >= draw.len() {
                    distinct += 1;
                } else if !hit[idx] {
                    hit[idx] = true;
                    distinct += 1;
                }
            }
            Ok(distinct as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = counts.iter().sum::<f64>() / draws as f64;
    let var = if draws > 1 {
        counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (draws - 1) as f64
    } else {
        0.0
    };
    Ok(ClusterCountEstimate {
        mean,
        std_error: (var / draws as f64).sqrt(),
        draws,
    })
}

/// Exact `E(k_n) = Σ_{i<n} θ / (θ + i)` under a DP with total mass `θ`.
pub fn dp_expected_clusters(theta: f64, n: usize) -> f64 {
    (0..n).map(|i| theta / (theta + i as f64)).sum()
}

/// DP total mass whose `E(k_n)` equals `target`, by bisection.
pub fn match_dp_mass(target: f64, n: usize) -> Result<f64> {
    if n == 0 || !(target > 1.0 && target < n as f64) {
        return Err(Error::InvalidParameter(format!(
            "target E(k_n) = {target} outside (1, {n})"
        )));
    }
    let (mut lo, mut hi) = (1e-12f64, 1e12f64);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if dp_expected_clusters(mid, n) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}
