//! Collapsed Gibbs sampling over order-of-appearance membership sequences.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::models::ConjugateModel;
use crate::composition::Composition;
use crate::eppf::dp_log_eppf;
use crate::error::{Error, Result};
use crate::estimator::{estimate_log_eppf, estimate_ppf, MembershipSequence};
use crate::numeric::sample_log_categorical;
use crate::rng::{derive_seed, from_seed};
use crate::weights::WeightModel;

pub const DEFAULT_PPF_DRAWS: usize = 1000;
pub const DEFAULT_BURN_IN: usize = 100;

fn default_ppf_draws() -> usize {
    DEFAULT_PPF_DRAWS
}

/// Prior on the random partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "prior", rename_all = "kebab-case")]
pub enum PartitionPriorSpec {
    Dp {
        theta: f64,
    },
    /// PPF values are Monte Carlo estimates with `ppf_draws` weight draws,
    /// cached per composition within one sweep and refreshed every sweep.
    Ssm {
        model: WeightModel,
        #[serde(default = "default_ppf_draws")]
        ppf_draws: usize,
    },
}

impl PartitionPriorSpec {
    pub fn ssm(model: WeightModel) -> Self {
        Self::Ssm {
            model,
            ppf_draws: DEFAULT_PPF_DRAWS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Dp { theta } if theta.is_finite() && *theta > 0.0 => Ok(()),
            Self::Dp { theta } => Err(Error::InvalidParameter(format!(
                "DP mass must be positive, got {theta}"
            ))),
            Self::Ssm { model, ppf_draws } => {
                if *ppf_draws == 0 {
                    return Err(Error::InvalidParameter("ppf_draws must be positive".into()));
                }
                model.validate()
            }
        }
    }
}

/// PPF lookups for one sweep. SSM estimates are memoized by composition
/// and seeded by the order in which compositions are first requested.
pub struct SweepPpf<'a> {
    prior: &'a PartitionPriorSpec,
    seed: u64,
    cache: HashMap<Composition, Vec<f64>>,
}

impl<'a> SweepPpf<'a> {
    pub fn new(prior: &'a PartitionPriorSpec, seed: u64) -> Self {
        Self {
            prior,
            seed,
            cache: HashMap::new(),
        }
    }

    pub fn log_ppf(&mut self, n: &Composition) -> Result<Vec<f64>> {
        match self.prior {
            PartitionPriorSpec::Dp { theta } => {
                let denom = (n.total() as f64 + theta).ln();
                let mut out: Vec<f64> =
                    n.sizes().iter().map(|&m| (m as f64).ln() - denom).collect();
                out.push(theta.ln() - denom);
                Ok(out)
            }
            PartitionPriorSpec::Ssm { model, ppf_draws } => {
                if let Some(v) = self.cache.get(n) {
                    return Ok(v.clone());
                }
                let seed = derive_seed(self.seed, self.cache.len() as u64);
                let est = estimate_ppf(model, n, *ppf_draws, seed)?;
                let logs: Vec<f64> = est.probabilities.iter().map(|p| p.ln()).collect();
                self.cache.insert(n.clone(), logs.clone());
                Ok(logs)
            }
        }
    }
}

struct ClusterState<M: ConjugateModel> {
    labels: Vec<usize>,
    sizes: Vec<usize>,
    stats: Vec<M::Stats>,
}

impl<M: ConjugateModel> ClusterState<M> {
    fn from_sequence(state: &MembershipSequence, data: &[M::Obs], model: &M) -> Self {
        let k = state.n_clusters();
        let labels: Vec<usize> = state.labels().iter().map(|s| s - 1).collect();
        let mut sizes = vec![0; k];
        let mut stats = vec![M::Stats::default(); k];
        for (&c, obs) in labels.iter().zip(data) {
            sizes[c] += 1;
            model.add(&mut stats[c], obs);
        }
        Self {
            labels,
            sizes,
            stats,
        }
    }

    /// Occupied cluster slots in order of first appearance, skipping `skip`.
    fn appearance_order(&self, skip: usize) -> Vec<usize> {
        let mut seen = vec![false; self.sizes.len()];
        let mut order = Vec::new();
        for (i, &c) in self.labels.iter().enumerate() {
            if i != skip && !seen[c] {
                seen[c] = true;
                order.push(c);
            }
        }
        order
    }
}

/// One systematic scan: every observation is removed and reassigned from
/// its full conditional `p_j(n_{−i}) · m(y_i | cluster j)`, `j = 1..k+1`.
pub fn gibbs_sweep<M: ConjugateModel>(
    state: &MembershipSequence,
    data: &[M::Obs],
    model: &M,
    prior: &PartitionPriorSpec,
    seed: u64,
) -> Result<MembershipSequence> {
    if state.len() != data.len() {
        return Err(Error::InvalidMembership(format!(
            "state has {} labels for {} observations",
            state.len(),
            data.len()
        )));
    }
    let mut rng = from_seed(seed);
    let mut ppf = SweepPpf::new(prior, derive_seed(seed, u64::MAX));
    let mut cs = ClusterState::from_sequence(state, data, model);
    sweep_in_place(&mut cs, data, model, &mut ppf, &mut rng)?;
    let out = MembershipSequence::canonicalize(&cs.labels);
    debug_assert!(MembershipSequence::new(out.labels().to_vec()).is_ok());
    Ok(out)
}

fn sweep_in_place<M: ConjugateModel, R: Rng + ?Sized>(
    cs: &mut ClusterState<M>,
    data: &[M::Obs],
    model: &M,
    ppf: &mut SweepPpf<'_>,
    rng: &mut R,
) -> Result<()> {
    let n = data.len();
    if n < 2 {
        return Ok(());
    }
    for (i, obs) in data.iter().enumerate() {
        let old = cs.labels[i];
        cs.sizes[old] -= 1;
        model.remove(&mut cs.stats[old], obs);

        let order = cs.appearance_order(i);
        let sizes: Vec<usize> = order.iter().map(|&c| cs.sizes[c]).collect();
        let comp = Composition::new(sizes)?;
        let mut logits = ppf.log_ppf(&comp)?;
        for (l, &c) in logits.iter_mut().zip(&order) {
            *l += model.log_predictive(&cs.stats[c], obs);
        }
        let fresh = M::Stats::default();
        logits[order.len()] += model.log_predictive(&fresh, obs);

        let pick = sample_log_categorical(&logits, rng);
        let target = match order.get(pick) {
            Some(&c) => c,
            None => match cs.sizes.iter().position(|&s| s == 0) {
                Some(slot) => slot,
                None => {
                    cs.sizes.push(0);
                    cs.stats.push(M::Stats::default());
                    cs.sizes.len() - 1
                }
            },
        };
        cs.labels[i] = target;
        cs.sizes[target] += 1;
        model.add(&mut cs.stats[target], obs);
    }
    Ok(())
}

/// Post-burn-in sample path with per-state unnormalized log posteriors.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionChain {
    pub states: Vec<MembershipSequence>,
    pub log_scores: Vec<f64>,
    pub iters: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl PartitionChain {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// One line per state, labels separated by spaces.
    pub fn write_states<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        for s in &self.states {
            let line: Vec<String> = s.labels().iter().map(|l| l.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// `ln p(partition) + Σ_j ln m(cluster j)`. The SSM prior term is a Monte
/// Carlo estimate.
pub fn log_posterior_score<M: ConjugateModel>(
    state: &MembershipSequence,
    data: &[M::Obs],
    model: &M,
    prior: &PartitionPriorSpec,
    seed: u64,
) -> Result<f64> {
    let comp = state.composition()?;
    let log_prior = match prior {
        PartitionPriorSpec::Dp { theta } => dp_log_eppf(&comp, *theta, 1.0),
        PartitionPriorSpec::Ssm {
            model: w,
            ppf_draws,
        } => estimate_log_eppf(w, &comp, *ppf_draws, seed)?,
    };
    let cs = ClusterState::from_sequence(state, data, model);
    Ok(log_prior + cs.stats.iter().map(|s| model.log_marginal(s)).sum::<f64>())
}

/// Starts from one cluster, runs `iters` sweeps (sweep `t` seeded by
/// `derive_seed(seed, t)`) and keeps the states after the first `burn_in`.
pub fn run_chain<M: ConjugateModel>(
    data: &[M::Obs],
    model: &M,
    prior: &PartitionPriorSpec,
    iters: usize,
    burn_in: usize,
    seed: u64,
) -> Result<PartitionChain> {
    prior.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidParameter("no observations".into()));
    }
    if iters <= burn_in {
        return Err(Error::InvalidParameter(format!(
            "iterations ({iters}) must exceed burn-in ({burn_in})"
        )));
    }
    let mut cs =
        ClusterState::from_sequence(&MembershipSequence::all_in_one(data.len()), data, model);
    let mut states = Vec::with_capacity(iters - burn_in);
    let mut log_scores = Vec::with_capacity(iters - burn_in);
    for t in 0..iters {
        let sweep_seed = derive_seed(seed, t as u64);
        let mut rng = from_seed(sweep_seed);
        let mut ppf = SweepPpf::new(prior, derive_seed(sweep_seed, u64::MAX));
        sweep_in_place(&mut cs, data, model, &mut ppf, &mut rng)?;
        if t >= burn_in {
            let state = MembershipSequence::canonicalize(&cs.labels);
            debug_assert!(MembershipSequence::new(state.labels().to_vec()).is_ok());
            log_scores.push(log_posterior_score(
                &state,
                data,
                model,
                prior,
                derive_seed(sweep_seed, u64::MAX - 1),
            )?);
            states.push(state);
        }
    }
    Ok(PartitionChain {
        states,
        log_scores,
        iters,
        burn_in,
        seed,
    })
}
