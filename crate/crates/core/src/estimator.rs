//! Monte Carlo PPF for arbitrary weight priors.
//!
//! For `L` prior draws of the weights and a size-biased prefix of length
//! `k(n)` for each, the PPF is the self-normalized average
//!
//! ```text
//! p̂_j = Σ_ℓ v_{jℓ} w_ℓ / Σ_ℓ w_ℓ,   w_ℓ = p(n | P̃^ℓ),   v_{jℓ} = p(s_{n+1} = j | n, P̃^ℓ)
//! ```
//!
//! where `Σ_j v_{jℓ} = 1` for every draw. Weights are handled in log space
//! and every draw uses its own counter-split random stream, so results do
//! not depend on how rayon schedules the draws.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::composition::{compositions_of, Composition};
use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, sample_categorical};
use crate::ppf::PutativePpf;
use crate::rng::{derive_seed, from_seed, substream};
use crate::weights::{
    partial_probability, predictive_given_weights, size_biased_permutation, WeightModel,
};

/// Largest composition total accepted by [`estimate_ppf`].
pub const MAX_COMPOSITION_TOTAL: usize = 10_000;
/// Below this maximum log-weight the estimate is declared degenerate.
pub const LOG_WEIGHT_FLOOR: f64 = -745.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PpfEstimate {
    pub composition: Composition,
    pub probabilities: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub draws: usize,
    pub effective_sample_size: f64,
    pub seed: u64,
}

struct DrawTerm {
    log_weight: f64,
    predictive: Vec<f64>,
}

fn draw_term(model: &WeightModel, n: &Composition, seed: u64, l: usize) -> Result<DrawTerm> {
    let k = n.k();
    let mut rng = substream(seed, l as u64);
    let draw = model.draw(&mut rng)?;
    match size_biased_permutation(&draw, k, &mut rng) {
        Ok(prefix) => Ok(DrawTerm {
            log_weight: partial_probability(n, &prefix)?,
            predictive: predictive_given_weights(k, &prefix)?,
        }),
        // fewer atoms than clusters: this draw cannot have produced n
        Err(Error::Exhausted { .. }) => Ok(DrawTerm {
            log_weight: f64::NEG_INFINITY,
            predictive: vec![0.0; k + 1],
        }),
        Err(e) => Err(e),
    }
}

/// Self-normalized importance-sampling estimate of `p_j(n)` with the prior
/// as proposal. Standard errors use the delta method for ratio estimators.
pub fn estimate_ppf(
    model: &WeightModel,
    n: &Composition,
    draws: usize,
    seed: u64,
) -> Result<PpfEstimate> {
    model.validate()?;
    if draws == 0 {
        return Err(Error::InvalidParameter("need at least one draw".into()));
    }
    if n.total() > MAX_COMPOSITION_TOTAL {
        return Err(Error::CompositionTooDeep {
            total: n.total(),
            cap: MAX_COMPOSITION_TOTAL,
        });
    }
    let terms = (0..draws)
        .into_par_iter()
        .map(|l| draw_term(model, n, seed, l))
        .collect::<Result<Vec<_>>>()?;

    let max_log = terms
        .iter()
        .map(|t| t.log_weight)
        .fold(f64::NEG_INFINITY, f64::max);
    if max_log.is_nan() || max_log < LOG_WEIGHT_FLOOR {
        return Err(Error::DegenerateWeights {
            max_log_weight: max_log,
        });
    }
    let width = n.k() + 1;
    let scaled: Vec<f64> = terms
        .iter()
        .map(|t| (t.log_weight - max_log).exp())
        .collect();
    let total: f64 = scaled.iter().sum();
    let total_sq: f64 = scaled.iter().map(|w| w * w).sum();

    let mut probabilities = vec![0.0; width];
    for (t, w) in terms.iter().zip(&scaled) {
        for (p, v) in probabilities.iter_mut().zip(&t.predictive) {
            *p += w * v;
        }
    }
    let mass: f64 = probabilities.iter().sum();
    for p in &mut probabilities {
        *p /= mass;
    }
    let standard_errors = (0..width)
        .map(|j| {
            let dev: f64 = terms
                .iter()
                .zip(&scaled)
                .map(|(t, w)| (w * (t.predictive[j] - probabilities[j])).powi(2))
                .sum();
            dev.sqrt() / total
        })
        .collect();

    Ok(PpfEstimate {
        composition: n.clone(),
        probabilities,
        standard_errors,
        draws,
        effective_sample_size: total * total / total_sq,
        seed,
    })
}

/// Monte Carlo estimate of `ln p(n)`, the probability of one specific
/// partition with composition `n` (not of all label sequences sharing it):
/// the log of the prior average of the partially exchangeable probability.
pub fn estimate_log_eppf(
    model: &WeightModel,
    n: &Composition,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    model.validate()?;
    if draws == 0 {
        return Err(Error::InvalidParameter("need at least one draw".into()));
    }
    if n.total() > MAX_COMPOSITION_TOTAL {
        return Err(Error::CompositionTooDeep {
            total: n.total(),
            cap: MAX_COMPOSITION_TOTAL,
        });
    }
    let logs = (0..draws)
        .into_par_iter()
        .map(|l| draw_term(model, n, seed, l).map(|t| t.log_weight))
        .collect::<Result<Vec<_>>>()?;
    Ok(log_sum_exp(&logs) - (draws as f64).ln())
}

/// Writes estimates as CSV rows `composition,j,estimate,stderr,L,ess,seed`.
pub fn write_estimates_csv<W: Write>(estimates: &[PpfEstimate], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(["composition", "j", "estimate", "stderr", "L", "ess", "seed"])?;
    for e in estimates {
        for (j, (p, se)) in e.probabilities.iter().zip(&e.standard_errors).enumerate() {
            w.write_record([
                e.composition.key(),
                (j + 1).to_string(),
                p.to_string(),
                se.to_string(),
                e.draws.to_string(),
                e.effective_sample_size.to_string(),
                e.seed.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One point of a PPF-against-cluster-size plot. The new-cluster entry
/// `j = k + 1` is placed at `cluster_size = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub composition: Composition,
    pub j: usize,
    pub cluster_size: usize,
    pub estimate: f64,
    pub stderr: f64,
}

/// Average of the estimates sharing one cluster size across scenarios.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub cluster_size: usize,
    pub mean_estimate: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpfCurve {
    pub estimates: Vec<PpfEstimate>,
    pub rows: Vec<CurveRow>,
    pub aggregate: Vec<CurvePoint>,
}

/// Estimates the PPF at every scenario composition (scenario `i` uses seed
/// `derive_seed(seed, i)`) and tabulates estimate against cluster size.
pub fn ppf_curve(
    model: &WeightModel,
    scenarios: &[Composition],
    draws: usize,
    seed: u64,
) -> Result<PpfCurve> {
    if scenarios.is_empty() {
        return Err(Error::InvalidParameter("no scenarios given".into()));
    }
    let estimates = scenarios
        .iter()
        .enumerate()
        .map(|(i, n)| estimate_ppf(model, n, draws, derive_seed(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut groups: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for e in &estimates {
        let sizes = e.composition.sizes();
        for (j, (&p, &se)) in e.probabilities.iter().zip(&e.standard_errors).enumerate() {
            let size = sizes.get(j).copied().unwrap_or(0);
            rows.push(CurveRow {
                composition: e.composition.clone(),
                j: j + 1,
                cluster_size: size,
                estimate: p,
                stderr: se,
            });
            let g = groups.entry(size).or_insert((0.0, 0));
            g.0 += p;
            g.1 += 1;
        }
    }
    let aggregate = groups
        .into_iter()
        .map(|(cluster_size, (sum, count))| CurvePoint {
            cluster_size,
            mean_estimate: sum / count as f64,
            count,
        })
        .collect();
    Ok(PpfCurve {
        estimates,
        rows,
        aggregate,
    })
}

impl PpfCurve {
    pub fn write_rows_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_aggregate_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        for p in &self.aggregate {
            w.serialize(p)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Cluster labels `s_1, …, s_n` in order of appearance.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MembershipSequence {
    labels: Vec<usize>,
}

impl MembershipSequence {
    /// Accepts only order-of-appearance labelings: `s_1 = 1` and
    /// `s_{i+1} ≤ 1 + max(s_1, …, s_i)`.
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        let mut max = 0;
        for (i, &s) in labels.iter().enumerate() {
            if s == 0 || s > max + 1 {
                return Err(Error::InvalidMembership(format!(
                    "label {s} at position {} follows maximum {max}",
                    i + 1
                )));
            }
            max = max.max(s);
        }
        Ok(Self { labels })
    }

    /// Relabels arbitrary cluster ids into order of appearance.
    pub fn canonicalize<T: Eq + std::hash::Hash + Copy>(ids: &[T]) -> Self {
        let mut map = HashMap::new();
        let labels = ids
            .iter()
            .map(|id| {
                let next = map.len() + 1;
                *map.entry(*id).or_insert(next)
            })
            .collect();
        Self { labels }
    }

    pub fn all_in_one(n: usize) -> Self {
        Self { labels: vec![1; n] }
    }

    /// Every set partition of `n` items as a restricted growth string, in
    /// lexicographic order. There are Bell(n) of them.
    pub fn enumerate(n: usize) -> Vec<Self> {
        fn grow(prefix: &mut Vec<usize>, max: usize, n: usize, out: &mut Vec<MembershipSequence>) {
            if prefix.len() == n {
                out.push(MembershipSequence {
                    labels: prefix.clone(),
                });
                return;
            }
            for s in 1..=max + 1 {
                prefix.push(s);
                grow(prefix, max.max(s), n, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        if n > 0 {
            grow(&mut vec![1], 1, n, &mut out);
        }
        out
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_clusters(&self) -> usize {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    /// Cluster sizes in order of appearance.
    pub fn composition(&self) -> Result<Composition> {
        let mut sizes = vec![0; self.n_clusters()];
        for &s in &self.labels {
            sizes[s - 1] += 1;
        }
        Composition::new(sizes)
    }
}

/// Anything that yields a predictive vector for a composition.
pub trait PpfSource: Sync {
    /// `seed` is consumed by stochastic sources and ignored by exact ones.
    fn predictive(&self, n: &Composition, seed: u64) -> Result<Vec<f64>>;
}

impl PpfSource for PutativePpf {
    fn predictive(&self, n: &Composition, _seed: u64) -> Result<Vec<f64>> {
        self.evaluate(n)
    }
}

/// The PPF of a weight model, re-estimated with fresh draws on every call.
#[derive(Debug, Clone)]
pub struct EstimatedPpf {
    pub model: WeightModel,
    pub draws: usize,
}

impl PpfSource for EstimatedPpf {
    fn predictive(&self, n: &Composition, seed: u64) -> Result<Vec<f64>> {
        Ok(estimate_ppf(&self.model, n, self.draws, seed)?.probabilities)
    }
}

/// Simulates `s_1, …, s_n` by sampling each next label from the predictive
/// vector at the running composition.
pub fn simulate_sss<S: PpfSource + ?Sized>(
    source: &S,
    n: usize,
    seed: u64,
) -> Result<MembershipSequence> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "sequence length must be positive".into(),
        ));
    }
    let mut rng = from_seed(seed);
    let mut labels = vec![1];
    let mut current = Composition::singleton();
    for step in 1..n {
        let probs = source.predictive(&current, derive_seed(seed, step as u64))?;
        let j = sample_categorical(&probs, &mut rng) + 1;
        labels.push(j);
        current = current.increment(j)?;
    }
    MembershipSequence::new(labels)
}

/// Composition frequencies over `reps` simulated sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionFrequencies {
    pub counts: BTreeMap<Composition, usize>,
    pub reps: usize,
}

impl PartitionFrequencies {
    pub fn frequency(&self, n: &Composition) -> f64 {
        self.counts.get(n).copied().unwrap_or(0) as f64 / self.reps as f64
    }
}

/// Largest sequence length accepted by the partition-law harness.
pub const MAX_ENUMERATION_LENGTH: usize = 5;

/// Simulates `reps` sequences of length `n` from the estimated PPF of
/// `model` (fresh `draws`-sample estimates at every step) and tabulates
/// their order-of-appearance compositions.
pub fn empirical_partition_distribution(
    model: &WeightModel,
    n: usize,
    reps: usize,
    draws: usize,
    seed: u64,
) -> Result<PartitionFrequencies> {
    if n == 0 || n > MAX_ENUMERATION_LENGTH {
        return Err(Error::InvalidParameter(format!(
            "sequence length must lie in 1..={MAX_ENUMERATION_LENGTH}"
        )));
    }
    if reps == 0 {
        return Err(Error::InvalidParameter(
            "need at least one replicate".into(),
        ));
    }
    let source = EstimatedPpf {
        model: model.clone(),
        draws,
    };
    let comps = (0..reps)
        .into_par_iter()
        .map(|r| simulate_sss(&source, n, derive_seed(seed, r as u64))?.composition())
        .collect::<Result<Vec<_>>>()?;
    let mut counts = BTreeMap::new();
    for c in comps {
        *counts.entry(c).or_insert(0) += 1;
    }
    Ok(PartitionFrequencies { counts, reps })
}

/// Law of the order-of-appearance composition of `n` observations computed
/// directly from the partially exchangeable representation: the prior
/// average of `p(c | P̃)` times the number of label sequences with
/// composition `c`.
pub fn partition_law_oracle(
    model: &WeightModel,
    n: usize,
    draws: usize,
    seed: u64,
) -> Result<BTreeMap<Composition, f64>> {
    model.validate()?;
    if n == 0 || n > MAX_ENUMERATION_LENGTH || draws == 0 {
        return Err(Error::InvalidParameter(format!(
            "need 1 ≤ n ≤ {MAX_ENUMERATION_LENGTH} and at least one draw"
        )));
    }
    let comps = compositions_of(n);
    let sums = (0..draws)
        .into_par_iter()
        .map(|l| {
            let mut rng = substream(seed, l as u64);
            let draw = model.draw(&mut rng)?;
            let prefix = size_biased_permutation(&draw, n.min(draw.len()), &mut rng)?;
            comps
                .iter()
                .map(|c| {
                    if c.k() > prefix.len() {
                        Ok(0.0)
                    } else {
                        Ok(partial_probability(c, &prefix)?.exp())
                    }
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut law = BTreeMap::new();
    for (i, c) in comps.iter().enumerate() {
        let mean = sums.iter().map(|s| s[i]).sum::<f64>() / draws as f64;
        law.insert(c.clone(), mean * c.label_sequence_count() as f64);
    }
    Ok(law)
}
