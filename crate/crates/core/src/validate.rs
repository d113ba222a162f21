//! Enumeration checks for the consistency conditions of putative PPFs and
//! EPPF tables.
//!
//! Each check walks every composition up to a bound and collects witnesses
//! instead of stopping at the first failure. The per-composition work is
//! independent, so it is spread over the rayon pool and merged in
//! enumeration order.

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::composition::{compositions_up_to, Composition};
use crate::eppf::EppfTable;
use crate::error::{Error, Result};
use crate::numeric::{approx_eq, log_approx_eq, log_sum_exp};
use crate::ppf::PutativePpf;

/// Default enumeration bound.
pub const DEFAULT_BOUND: usize = 6;

/// One failed equation. `i`/`j` are 1-based cluster indices (0 when the
/// check has no index, as for additivity); `permuted` is set by the label
/// symmetry check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub composition: Composition,
    pub i: usize,
    pub j: usize,
    pub lhs: f64,
    pub rhs: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permuted: Option<Composition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub holds: bool,
    pub bound: usize,
    pub violations: Vec<Violation>,
}

impl BalanceReport {
    pub fn new(bound: usize, violations: Vec<Violation>) -> Self {
        Self {
            holds: violations.is_empty(),
            bound,
            violations,
        }
    }

    /// Concatenates two reports; associative, so partial reports from
    /// workers can be folded in any grouping.
    pub fn merge(mut self, other: BalanceReport) -> Self {
        self.violations.extend(other.violations);
        self.bound = self.bound.max(other.bound);
        self.holds = self.violations.is_empty();
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn check_bound(bound: usize) -> Result<()> {
    if bound == 0 {
        Err(Error::InvalidParameter("bound must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn collect(bound: usize, per_composition: Vec<Result<Vec<Violation>>>) -> Result<BalanceReport> {
    let mut all = Vec::new();
    for v in per_composition {
        all.extend(v?);
    }
    Ok(BalanceReport::new(bound, all))
}

/// Path-independence of the recursive construction:
/// `p_i(n) p_j(n^{i+}) = p_j(n) p_i(n^{j+})` for all `n` with total
/// `≤ bound` and all `1 ≤ i < j ≤ k + 1`.
pub fn check_balance(ppf: &PutativePpf, bound: usize) -> Result<BalanceReport> {
    check_bound(bound)?;
    let results = compositions_up_to(bound)
        .par_iter()
        .map(|n| balance_at(ppf, n))
        .collect();
    collect(bound, results)
}

fn balance_at(ppf: &PutativePpf, n: &Composition) -> Result<Vec<Violation>> {
    let k = n.k();
    let base = ppf.evaluate(n)?;
    let grown: Vec<Vec<f64>> = (1..=k + 1)
        .map(|j| ppf.evaluate(&n.increment(j)?))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for i in 1..=k + 1 {
        for j in i + 1..=k + 1 {
            let lhs = base[i - 1].ln() + grown[i - 1][j - 1].ln();
            let rhs = base[j - 1].ln() + grown[j - 1][i - 1].ln();
            if !log_approx_eq(lhs, rhs) {
                out.push(Violation {
                    composition: n.clone(),
                    i,
                    j,
                    lhs: lhs.exp(),
                    rhs: rhs.exp(),
                    permuted: None,
                });
            }
        }
    }
    Ok(out)
}

/// Label symmetry: `p_i(n_1, …, n_k) = p_{σ⁻¹(i)}(n_{σ(1)}, …, n_{σ(k)})`
/// for every permutation `σ` of the `k` existing clusters and `i ≤ k`.
/// Together with balance this makes the recursively built function an EPPF.
///
/// Violations carry `j = σ⁻¹(i)` and the permuted composition.
pub fn check_label_symmetry(ppf: &PutativePpf, bound: usize) -> Result<BalanceReport> {
    check_bound(bound)?;
    let results = compositions_up_to(bound)
        .par_iter()
        .map(|n| symmetry_at(ppf, n))
        .collect();
    collect(bound, results)
}

fn symmetry_at(ppf: &PutativePpf, n: &Composition) -> Result<Vec<Violation>> {
    let k = n.k();
    let mut out = Vec::new();
    if k < 2 {
        return Ok(out);
    }
    let base = ppf.evaluate(n)?;
    for sigma in (0..k).permutations(k) {
        if sigma.iter().enumerate().all(|(a, &b)| a == b) {
            continue;
        }
        let permuted = n.permuted(&sigma);
        let probs = ppf.evaluate(&permuted)?;
        for (i, &b) in base.iter().take(k).enumerate() {
            // position of original cluster i in the permuted composition
            let inv = sigma.iter().position(|&s| s == i).expect("permutation");
            if !approx_eq(b, probs[inv]) {
                out.push(Violation {
                    composition: n.clone(),
                    i: i + 1,
                    j: inv + 1,
                    lhs: b,
                    rhs: probs[inv],
                    permuted: Some(permuted.clone()),
                });
            }
        }
    }
    Ok(out)
}

/// Additivity `p(n) = Σ_{j=1}^{k+1} p(n^{j+})` for every `n` with total
/// `≤ bound − 1`.
pub fn check_additivity(eppf: &EppfTable) -> Result<BalanceReport> {
    let bound = eppf.bound();
    let targets: Vec<Composition> = compositions_up_to(bound.saturating_sub(1));
    let results = targets
        .par_iter()
        .map(|n| {
            let lhs = eppf.log_prob(n)?;
            let children = (1..=n.k() + 1)
                .map(|j| eppf.log_prob(&n.increment(j)?))
                .collect::<Result<Vec<f64>>>()?;
            let rhs = log_sum_exp(&children);
            Ok(if log_approx_eq(lhs, rhs) {
                Vec::new()
            } else {
                vec![Violation {
                    composition: n.clone(),
                    i: 0,
                    j: 0,
                    lhs: lhs.exp(),
                    rhs: rhs.exp(),
                    permuted: None,
                }]
            })
        })
        .collect();
    collect(bound, results)
}
