//! Putative predictive probability functions.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::composition::Composition;
use crate::error::{Error, Result};

/// Tolerance on `|Σ p_j − 1|` for a putative PPF output.
pub const NORMALIZATION_TOL: f64 = 1e-12;

type Rule = dyn Fn(&Composition) -> Result<Vec<f64>> + Send + Sync;

/// A rule mapping a composition `n` with `k` clusters to a probability
/// vector of length `k + 1`: entry `j < k` is the chance that the next
/// observation joins cluster `j + 1`, the last entry opens a new cluster.
///
/// Nothing about the rule is assumed beyond nonnegativity and
/// normalization, which [`PutativePpf::evaluate`] enforces on every call.
#[derive(Clone)]
pub struct PutativePpf {
    name: String,
    rule: Arc<Rule>,
}

impl fmt::Debug for PutativePpf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PutativePpf")
            .field("name", &self.name)
            .finish()
    }
}

impl PutativePpf {
    pub fn new<F>(name: impl Into<String>, rule: F) -> Self
    where
        F: Fn(&Composition) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            rule: Arc::new(move |n| Ok(rule(n))),
        }
    }

    pub fn try_new<F>(name: impl Into<String>, rule: F) -> Self
    where
        F: Fn(&Composition) -> Result<Vec<f64>> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            rule: Arc::new(rule),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn evaluate(&self, n: &Composition) -> Result<Vec<f64>> {
        let probs = (self.rule)(n)?;
        let invalid = |reason: String| Error::InvalidPpf {
            name: self.name.clone(),
            composition: n.clone(),
            reason,
        };
        if probs.len() != n.k() + 1 {
            return Err(invalid(format!(
                "length {} but k + 1 = {}",
                probs.len(),
                n.k() + 1
            )));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(invalid(format!("entry {p} is not a probability")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(invalid(format!("entries sum to {total}")));
        }
        Ok(probs)
    }

    /// `p_j(n)` for a 1-based `j` in `1..=k+1`.
    pub fn prob(&self, n: &Composition, j: usize) -> Result<f64> {
        let probs = self.evaluate(n)?;
        probs
            .get(j.wrapping_sub(1))
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("index {j} outside 1..={}", n.k() + 1)))
    }
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}

/// Dirichlet-process (Pólya urn) rule `n_j / (n + θ)`, `θ / (n + θ)`.
pub fn dp_ppf(theta: f64) -> Result<PutativePpf> {
    check_positive("theta", theta)?;
    Ok(PutativePpf::new(format!("dp(theta={theta})"), move |n| {
        let denom = n.total() as f64 + theta;
        n.sizes()
            .iter()
            .map(|&s| s as f64 / denom)
            .chain(std::iter::once(theta / denom))
            .collect()
    }))
}

/// Rule proportional to `(f(n_1), …, f(n_k), θ)`.
///
/// Balance holds for every bound exactly when `f(m) = a·m`; any other
/// positive `f` produces a witness, which makes this the test bed for the
/// linear characterization.
pub fn size_function_ppf<F>(name: impl Into<String>, f: F, theta: f64) -> Result<PutativePpf>
where
    F: Fn(usize) -> f64 + Send + Sync + 'static,
{
    check_positive("theta", theta)?;
    let name = name.into();
    let label = name.clone();
    Ok(PutativePpf::try_new(name, move |n| {
        let mut weights = Vec::with_capacity(n.k() + 1);
        for &s in n.sizes() {
            let w = f(s);
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidPpf {
                    name: label.clone(),
                    composition: n.clone(),
                    reason: format!("f({s}) = {w} is not positive"),
                });
            }
            weights.push(w);
        }
        weights.push(theta);
        let total: f64 = weights.iter().sum();
        Ok(weights.into_iter().map(|w| w / total).collect())
    }))
}

/// Built-in PPF families addressable from configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum PpfFamily {
    Dp {
        theta: f64,
    },
    /// `f(m) = slope·m + intercept`.
    LinearF {
        slope: f64,
        #[serde(default)]
        intercept: f64,
        theta: f64,
    },
    /// `f(m) = Σ_d coefficients[d]·m^d`, constant term first.
    PolynomialF {
        coefficients: Vec<f64>,
        theta: f64,
    },
}

impl PpfFamily {
    pub fn build(&self) -> Result<PutativePpf> {
        match self {
            Self::Dp { theta } => dp_ppf(*theta),
            Self::LinearF {
                slope,
                intercept,
                theta,
            } => {
                let (a, b) = (*slope, *intercept);
                size_function_ppf(
                    format!("linear-f(f(m)={a}m+{b}, theta={theta})"),
                    move |m| a * m as f64 + b,
                    *theta,
                )
            }
            Self::PolynomialF {
                coefficients,
                theta,
            } => {
                if coefficients.is_empty() {
                    return Err(Error::InvalidParameter(
                        "polynomial-f needs at least one coefficient".into(),
                    ));
                }
                let coefs = coefficients.clone();
                size_function_ppf(
                    format!("polynomial-f(coefficients={coefficients:?}, theta={theta})"),
                    move |m| {
                        let x = m as f64;
                        coefs.iter().rev().fold(0.0, |acc, c| acc * x + c)
                    },
                    *theta,
                )
            }
        }
    }
}
