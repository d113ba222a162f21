//! Exchangeable partition probability functions stored as tables.
//!
//! Values are kept as natural logarithms; probabilities are produced only by
//! the accessors.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::composition::{compositions_up_to, Composition};
use crate::error::{Error, Result};
use crate::numeric::{log_approx_eq, ABS_FLOOR, REL_TOL};
use crate::ppf::PutativePpf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EppfOrigin {
    DerivedFromPpf,
    ClosedFormDp,
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EppfTable {
    bound: usize,
    values: BTreeMap<Composition, f64>,
    origin: EppfOrigin,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    composition: Composition,
    log_probability: f64,
}

impl EppfTable {
    /// Builds a table from log-probabilities, checking `p(1) = 1` and that
    /// every value lies in `[0, 1]`.
    pub fn from_log_values(
        bound: usize,
        values: BTreeMap<Composition, f64>,
        origin: EppfOrigin,
    ) -> Result<Self> {
        if bound == 0 {
            return Err(Error::InvalidParameter("bound must be at least 1".into()));
        }
        match values.get(&Composition::singleton()) {
            Some(v) if v.abs() <= REL_TOL => {}
            Some(v) => {
                return Err(Error::InvalidParameter(format!(
                    "p(1) must equal 1, got {}",
                    v.exp()
                )))
            }
            None => return Err(Error::MissingEntry(Composition::singleton())),
        }
        for (c, v) in &values {
            if v.is_nan() || *v > REL_TOL {
                return Err(Error::InvalidParameter(format!(
                    "p{c} = {} outside [0, 1]",
                    v.exp()
                )));
            }
            if c.total() > bound {
                return Err(Error::InvalidParameter(format!(
                    "{c} exceeds table bound {bound}"
                )));
            }
        }
        Ok(Self {
            bound,
            values,
            origin,
        })
    }

    /// Convenience constructor from plain probabilities, e.g. for tests.
    pub fn from_probabilities(
        bound: usize,
        entries: impl IntoIterator<Item = (Composition, f64)>,
    ) -> Result<Self> {
        let values = entries.into_iter().map(|(c, p)| (c, p.ln())).collect();
        Self::from_log_values(bound, values, EppfOrigin::External)
    }

    /// Closed-form Dirichlet-process table on all compositions up to `bound`.
    pub fn dp(theta: f64, a: f64, bound: usize) -> Result<Self> {
        check_dp_params(theta, a)?;
        let values = compositions_up_to(bound)
            .into_iter()
            .map(|c| {
                let v = dp_log_eppf(&c, theta, a);
                (c, v)
            })
            .collect();
        Self::from_log_values(bound, values, EppfOrigin::ClosedFormDp)
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    pub fn origin(&self) -> EppfOrigin {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn log_prob(&self, n: &Composition) -> Result<f64> {
        self.values
            .get(n)
            .copied()
            .ok_or_else(|| Error::MissingEntry(n.clone()))
    }

    pub fn prob(&self, n: &Composition) -> Result<f64> {
        self.log_prob(n).map(f64::exp)
    }

    /// Entries ordered by total size, then lexically.
    pub fn iter(&self) -> impl Iterator<Item = (&Composition, f64)> {
        self.values.iter().map(|(c, v)| (c, *v))
    }

    /// CSV with header `composition,log_probability`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        for (c, v) in self.iter() {
            w.serialize(CsvRow {
                composition: c.clone(),
                log_probability: v,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a CSV written by [`EppfTable::write_csv`]. The bound is the
    /// largest total size present.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut values = BTreeMap::new();
        for row in r.deserialize() {
            let row: CsvRow = row?;
            values.insert(row.composition, row.log_probability);
        }
        let bound = values.keys().map(Composition::total).max().unwrap_or(0);
        Self::from_log_values(bound, values, EppfOrigin::External)
    }
}

fn check_dp_params(theta: f64, a: f64) -> Result<()> {
    if !(theta > 0.0 && theta.is_finite() && a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "dp eppf needs theta > 0 and a > 0, got theta={theta}, a={a}"
        )));
    }
    Ok(())
}

/// Log of the Dirichlet-process EPPF
/// `θ^{k−1} a^{n−k} Π(n_i−1)! / [θ+a]_{n−1;a}` with
/// `[x]_{m;a} = x(x+a)…(x+(m−1)a)`, i.e. the EPPF generated by the rule
/// `p_j ∝ a·n_j`, `p_{k+1} ∝ θ` (a DP with total mass `θ/a`).
///
/// Sizes are summed in sorted order so the result is bitwise invariant
/// under permutations of the composition.
pub fn dp_log_eppf(n: &Composition, theta: f64, a: f64) -> f64 {
    let k = n.k();
    let total = n.total();
    let mut sorted = n.sizes().to_vec();
    sorted.sort_unstable();
    let log_factorials: f64 = sorted
        .iter()
        .map(|&s| (1..s).map(|m| (m as f64).ln()).sum::<f64>())
        .sum();
    let rising: f64 = (1..total).map(|i| (theta + i as f64 * a).ln()).sum();
    (k as f64 - 1.0) * theta.ln() + (total - k) as f64 * a.ln() + log_factorials - rising
}

pub fn dp_eppf(n: &Composition, theta: f64, a: f64) -> Result<f64> {
    check_dp_params(theta, a)?;
    Ok(dp_log_eppf(n, theta, a).exp())
}

/// Predictive rule implied by an EPPF: `p_j(n) = p(n^{j+}) / p(n)`.
pub fn ppf_from_eppf(eppf: &EppfTable, n: &Composition) -> Result<Vec<f64>> {
    let base = eppf.log_prob(n)?;
    if base.exp() <= ABS_FLOOR || base == f64::NEG_INFINITY {
        return Err(Error::DivisionByZero(n.clone()));
    }
    (1..=n.k() + 1)
        .map(|j| {
            let next = n.increment(j)?;
            Ok((eppf.log_prob(&next)? - base).exp())
        })
        .collect()
}

/// Memoized log-PPF evaluation.
struct LogPpfCache<'a> {
    ppf: &'a PutativePpf,
    cache: HashMap<Composition, Vec<f64>>,
}

impl<'a> LogPpfCache<'a> {
    fn new(ppf: &'a PutativePpf) -> Self {
        Self {
            ppf,
            cache: HashMap::new(),
        }
    }

    fn log_prob(&mut self, n: &Composition, j: usize) -> Result<f64> {
        if !self.cache.contains_key(n) {
            let logs = self.ppf.evaluate(n)?.into_iter().map(f64::ln).collect();
            self.cache.insert(n.clone(), logs);
        }
        Ok(self.cache[n][j - 1])
    }

    /// Log-probability of a full order-of-appearance label sequence.
    fn sequence_log_prob(&mut self, labels: &[usize]) -> Result<f64> {
        let mut current = Composition::singleton();
        let mut total = 0.0;
        for &label in &labels[1..] {
            total += self.log_prob(&current, label)?;
            current = current.increment(label)?;
        }
        Ok(total)
    }
}

/// Alternate insertion order for `n`: the canonical sequence with the last
/// `j, j+1` boundary swapped, where cluster `j` has at least two members so
/// the swap keeps order-of-appearance labeling. `None` when every earlier
/// cluster is a singleton, in which case the insertion order is unique.
fn alternate_labels(n: &Composition) -> Option<Vec<usize>> {
    let sizes = n.sizes();
    let j = (0..sizes.len().saturating_sub(1))
        .rev()
        .find(|&j| sizes[j] >= 2)?;
    let mut labels = n.canonical_labels();
    let boundary: usize = sizes[..=j].iter().sum::<usize>() - 1;
    labels.swap(boundary, boundary + 1);
    Some(labels)
}

/// Builds `p` on every composition of total `≤ bound` from `p(1) = 1` and
/// `p(n^{j+}) = p_j(n) p(n)` along the canonical insertion order. Each value
/// is recomputed along one alternate order; disagreement beyond the shared
/// relative tolerance is reported as [`Error::PathDependent`].
pub fn eppf_from_ppf(ppf: &PutativePpf, bound: usize) -> Result<EppfTable> {
    if bound == 0 {
        return Err(Error::InvalidParameter("bound must be at least 1".into()));
    }
    let mut cache = LogPpfCache::new(ppf);
    let mut values = BTreeMap::new();
    values.insert(Composition::singleton(), 0.0);
    for n in compositions_up_to(bound).into_iter().skip(1) {
        let sizes = n.sizes();
        let k = n.k();
        let (parent, j) = if sizes[k - 1] == 1 {
            (Composition::new(sizes[..k - 1].to_vec())?, k)
        } else {
            let mut s = sizes.to_vec();
            s[k - 1] -= 1;
            (Composition::new(s)?, k)
        };
        let canonical = values[&parent] + cache.log_prob(&parent, j)?;
        if let Some(labels) = alternate_labels(&n) {
            let alternate = cache.sequence_log_prob(&labels)?;
            if !log_approx_eq(canonical, alternate) {
                return Err(Error::PathDependent {
                    composition: n,
                    canonical: canonical.exp(),
                    alternate: alternate.exp(),
                });
            }
        }
        values.insert(n, canonical);
    }
    EppfTable::from_log_values(bound, values, EppfOrigin::DerivedFromPpf)
}
