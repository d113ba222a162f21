//! Posterior summaries of a partition chain.

use std::io::Write;

use serde::Serialize;

use super::models::{ConjugateModel, NormalModelConfig, NormalStats};
use super::sampler::{PartitionChain, PartitionPriorSpec, SweepPpf};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

pub const DEFAULT_GRID_POINTS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityPoint {
    pub y: f64,
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    /// `cocluster[i][j]` estimates `p(s_i = s_j | data)`.
    pub cocluster: Vec<Vec<f64>>,
    /// `k_dist[k - 1]` estimates `p(k_n = k | data)`.
    pub k_dist: Vec<f64>,
    /// `nmax_dist[m - 1]` estimates `p(n_(1) = m | data)`.
    pub nmax_dist: Vec<f64>,
    pub predictive: Option<Vec<DensityPoint>>,
}

fn mode(dist: &[f64]) -> usize {
    // first maximum wins
    let mut best = 0;
    for (i, &p) in dist.iter().enumerate() {
        if p > dist[best] {
            best = i;
        }
    }
    best + 1
}

impl PosteriorSummary {
    pub fn n(&self) -> usize {
        self.cocluster.len()
    }

    pub fn mean_k(&self) -> f64 {
        self.k_dist
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 * p)
            .sum()
    }

    pub fn mode_k(&self) -> usize {
        mode(&self.k_dist)
    }

    pub fn mean_nmax(&self) -> f64 {
        self.nmax_dist
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 * p)
            .sum()
    }

    pub fn mode_nmax(&self) -> usize {
        mode(&self.nmax_dist)
    }

    /// Square matrix without header, one row per line.
    pub fn write_cocluster_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        for row in &self.cocluster {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    fn write_dist<W: Write>(dist: &[f64], name: &str, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        w.write_record([name, "probability"])?;
        for (i, p) in dist.iter().enumerate() {
            w.write_record([(i + 1).to_string(), p.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_k_csv<W: Write>(&self, writer: W) -> Result<()> {
        Self::write_dist(&self.k_dist, "k", writer)
    }

    pub fn write_nmax_csv<W: Write>(&self, writer: W) -> Result<()> {
        Self::write_dist(&self.nmax_dist, "nmax", writer)
    }

    pub fn write_predictive_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        w.write_record(["y", "density"])?;
        for p in self.predictive.iter().flatten() {
            w.write_record([p.y.to_string(), p.density.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Co-clustering frequencies and the distributions of `k_n` and `n_(1)`.
pub fn summarize(chain: &PartitionChain) -> Result<PosteriorSummary> {
    let first = chain.states.first().ok_or(Error::EmptyChain)?;
    let n = first.len();
    let mut co = vec![vec![0usize; n]; n];
    let mut k_counts = vec![0usize; n];
    let mut nmax_counts = vec![0usize; n];
    for s in &chain.states {
        let labels = s.labels();
        for i in 0..n {
            for j in i..n {
                if labels[i] == labels[j] {
                    co[i][j] += 1;
                }
            }
        }
        let comp = s.composition()?;
        k_counts[comp.k() - 1] += 1;
        nmax_counts[comp.largest() - 1] += 1;
    }
    let total = chain.states.len() as f64;
    let mut cocluster = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = co[i][j] as f64 / total;
            cocluster[i][j] = v;
            cocluster[j][i] = v;
        }
    }
    let norm = |c: Vec<usize>| c.into_iter().map(|x| x as f64 / total).collect();
    Ok(PosteriorSummary {
        cocluster,
        k_dist: norm(k_counts),
        nmax_dist: norm(nmax_counts),
        predictive: None,
    })
}

/// Equispaced points over the data range widened by three sample
/// standard deviations on each side.
pub fn default_grid(data: &[f64], points: usize) -> Result<Vec<f64>> {
    if data.is_empty() || points < 2 {
        return Err(Error::InvalidParameter(
            "grid needs data and at least two points".into(),
        ));
    }
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let sd = if data.len() > 1 {
        (data.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        1.0
    };
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * sd;
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * sd;
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points).map(|i| lo + step * i as f64).collect())
}

/// Rao-Blackwellized predictive density: for every state, the PPF-weighted
/// mixture of cluster posterior predictives and the prior predictive for a
/// new cluster, averaged over states.
pub fn predictive_density(
    chain: &PartitionChain,
    data: &[f64],
    cfg: &NormalModelConfig,
    prior: &PartitionPriorSpec,
    grid: &[f64],
    seed: u64,
) -> Result<Vec<DensityPoint>> {
    if chain.is_empty() {
        return Err(Error::EmptyChain);
    }
    let mut density = vec![0.0; grid.len()];
    for (t, s) in chain.states.iter().enumerate() {
        let comp = s.composition()?;
        let mut stats = vec![NormalStats::default(); comp.k()];
        for (&l, y) in s.labels().iter().zip(data) {
            cfg.add(&mut stats[l - 1], y);
        }
        stats.push(NormalStats::default());
        let mut ppf = SweepPpf::new(prior, derive_seed(seed, t as u64));
        let weights: Vec<f64> = ppf.log_ppf(&comp)?.iter().map(|l| l.exp()).collect();
        for (d, &y) in density.iter_mut().zip(grid) {
            *d += weights
                .iter()
                .zip(&stats)
                .map(|(w, st)| w * cfg.predictive_density(st, y))
                .sum::<f64>();
        }
    }
    let total = chain.len() as f64;
    Ok(grid
        .iter()
        .zip(density)
        .map(|(&y, d)| DensityPoint {
            y,
            density: d / total,
        })
        .collect())
}

/// Standard error of the mean of a correlated series from `batches`
/// non-overlapping batch means. Trailing observations that do not fill a
/// batch are dropped.
pub fn batch_means_se(series: &[f64], batches: usize) -> Result<f64> {
    if batches < 2 || series.len() < batches {
        return Err(Error::InvalidParameter(format!(
            "need at least {batches} ≥ 2 observations for batch means"
        )));
    }
    let size = series.len() / batches;
    let means: Vec<f64> = series
        .chunks_exact(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Ok((var / batches as f64).sqrt())
}
