//! Ordered cluster-size vectors.
//!
//! A [`Composition`] lists cluster sizes in order of appearance, so `(2, 1)`
//! and `(1, 2)` are different keys. Putative PPFs are not assumed symmetric
//! until validated, hence nothing here sorts.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Composition {
    sizes: Vec<usize>,
}

impl Composition {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidComposition("no clusters".into()));
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidComposition(format!(
                "zero-sized cluster in {sizes:?}"
            )));
        }
        Ok(Self { sizes })
    }

    /// The single-observation composition `(1)`.
    pub fn singleton() -> Self {
        Self { sizes: vec![1] }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Number of clusters.
    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    /// Number of observations.
    pub fn total(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// `n^{j+}` with a 1-based `j`: grows cluster `j`, or appends a new
    /// cluster of size one when `j == k + 1`.
    pub fn increment(&self, j: usize) -> Result<Self> {
        let k = self.k();
        if j == 0 || j > k + 1 {
            return Err(Error::InvalidParameter(format!(
                "increment index {j} outside 1..={}",
                k + 1
            )));
        }
        let mut sizes = self.sizes.clone();
        if j == k + 1 {
            sizes.push(1);
        } else {
            sizes[j - 1] += 1;
        }
        Ok(Self { sizes })
    }

    /// Composition reordered as `(n_{σ(1)}, …, n_{σ(k)})` for a 0-based
    /// permutation `sigma`.
    pub fn permuted(&self, sigma: &[usize]) -> Self {
        debug_assert_eq!(sigma.len(), self.k());
        Self {
            sizes: sigma.iter().map(|&s| self.sizes[s]).collect(),
        }
    }

    /// Dash-separated key, e.g. `2-1-1`.
    pub fn key(&self) -> String {
        let parts: Vec<String> = self.sizes.iter().map(|s| s.to_string()).collect();
        parts.join("-")
    }

    /// Canonical order-of-appearance label sequence `1^{n_1} 2^{n_2} …`.
    pub fn canonical_labels(&self) -> Vec<usize> {
        self.sizes
            .iter()
            .enumerate()
            .flat_map(|(j, &n)| std::iter::repeat_n(j + 1, n))
            .collect()
    }

    /// Number of order-of-appearance label sequences (equivalently, set
    /// partitions of `[n]` with blocks ordered by least element) whose block
    /// sizes are exactly this composition.
    pub fn label_sequence_count(&self) -> u128 {
        let mut remaining = self.total();
        let mut count: u128 = 1;
        for &nj in &self.sizes {
            // first remaining element opens block j; choose its other members
            count *= binomial(remaining as u128 - 1, nj as u128 - 1);
            remaining -= nj;
        }
        count
    }

    /// Largest cluster size `n_(1)`.
    pub fn largest(&self) -> usize {
        self.sizes.iter().copied().max().unwrap_or(0)
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

impl Ord for Composition {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total()
            .cmp(&other.total())
            .then_with(|| self.sizes.cmp(&other.sizes))
    }
}

impl PartialOrd for Composition {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.key().replace('-', ","))
    }
}

impl FromStr for Composition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim().trim_start_matches('(').trim_end_matches(')');
        let sizes = trimmed
            .split(['-', ','])
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("bad composition `{s}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sizes)
    }
}

impl Serialize for Composition {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.key())
    }
}

impl<'de> Deserialize<'de> for Composition {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// All compositions with total exactly `n` (there are `2^{n-1}`).
pub fn compositions_of(n: usize) -> Vec<Composition> {
    if n == 0 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(1 << (n - 1).min(20));
    let mut current = Vec::new();
    fill(n, &mut current, &mut out);
    out.sort();
    out
}

fn fill(remaining: usize, current: &mut Vec<usize>, out: &mut Vec<Composition>) {
    if remaining == 0 {
        out.push(Composition {
            sizes: current.clone(),
        });
        return;
    }
    for first in 1..=remaining {
        current.push(first);
        fill(remaining - first, current, out);
        current.pop();
    }
}

/// All compositions with total in `1..=bound`, ordered by total then lexically.
pub fn compositions_up_to(bound: usize) -> Vec<Composition> {
    (1..=bound).flat_map(compositions_of).collect()
}
