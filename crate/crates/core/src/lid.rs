//! Local intrinsic dimensionality of the weighted coupling graph
//! (Levina-Bickel maximum-likelihood estimator on k-nearest distances).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{dijkstra, CouplingGraph, DistanceMatrix, MetricOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LidResult {
    /// One estimate per site; `+inf` where all k distances coincide.
    pub per_point: Vec<f64>,
    /// Mean over the finite estimates, `+inf` if there are none.
    pub mean: f64,
    pub k: usize,
    pub n_sentinels: usize,
}

impl LidResult {
    fn from_points(per_point: Vec<f64>, k: usize) -> Self {
        let finite: Vec<f64> = per_point.iter().copied().filter(|x| x.is_finite()).collect();
        let n_sentinels = per_point.len() - finite.len();
        let mean = if finite.is_empty() {
            f64::INFINITY
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        Self { per_point, mean, k, n_sentinels }
    }

    pub fn min(&self) -> f64 {
        self.finite().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        let m = self.finite().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            f64::INFINITY
        } else {
            m
        }
    }

    fn finite(&self) -> impl Iterator<Item = f64> + '_ {
        self.per_point.iter().copied().filter(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidOptions {
    /// Defaults to `floor(log2 n)`.
    pub k: Option<usize>,
    pub metric: MetricOptions,
}

impl Default for LidOptions {
    fn default() -> Self {
        Self { k: None, metric: MetricOptions::default() }
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k <= 1 || k >= n {
        return Err(Error::InvalidK { k, n });
    }
    Ok(())
}

/// The `k` smallest off-diagonal distances of every site, ascending; ties
/// go to the lower site index.
pub fn knn_distances(d: &DistanceMatrix, k: usize) -> Result<Vec<Vec<f64>>> {
    let n = d.n_sites();
    check_k(k, n)?;
    (0..n)
        .map(|i| {
            let mut row: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
            for (j, &x) in d.row(i).iter().enumerate() {
                if j == i {
                    continue;
                }
                if !(x > 0.0) {
                    return Err(Error::InvalidDistance(x));
                }
                row.push((x, j));
            }
            row.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            Ok(row.into_iter().take(k).map(|p| p.0).collect())
        })
        .collect()
}

/// `((1/(k-1)) sum_{i<k} ln(d_k/d_i))^-1`, or `+inf` when the sum vanishes.
pub fn lid_mle(dists: &[f64]) -> Result<f64> {
    let k = dists.len();
    if k < 2 {
        return Err(Error::InvalidK { k, n: k });
    }
    if let Some(&bad) = dists.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::InvalidDistance(bad));
    }
    let dk = dists[k - 1];
    let sum: f64 = dists[..k - 1]
        .iter()
        .map(|&di| if di == dk { 0.0 } else { (dk / di).ln() })
        .sum();
    if sum == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((k - 1) as f64 / sum)
}

/// Mean LID with `k = floor(log2 n)` on the default metric.
pub fn mean_lid(g: &CouplingGraph) -> Result<LidResult> {
    mean_lid_with(g, &LidOptions::default())
}

pub fn mean_lid_with(g: &CouplingGraph, opts: &LidOptions) -> Result<LidResult> {
    let n = g.n_sites();
    let k = match opts.k {
        Some(k) => k,
        None => {
            if n < 16 {
                return Err(Error::InvalidSize { n, reason: "default k = log2(n) needs n >= 16" });
            }
            n.ilog2() as usize
        }
    };
    check_k(k, n)?;
    let per_point = (0..n)
        .into_par_iter()
        .map(|i| {
            let dists = nearest(g, i, k, &opts.metric)?;
            lid_mle(&dists)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(LidResult::from_points(per_point, k))
}

/// k nearest distances from `i` without building the full matrix.
fn nearest(g: &CouplingGraph, i: usize, k: usize, metric: &MetricOptions) -> Result<Vec<f64>> {
    let dists: Vec<f64> = if metric.shortest_path {
        dijkstra(g, i, k + 1, metric).into_iter().skip(1).map(|p| p.1).collect()
    } else {
        let mut d: Vec<f64> = g
            .neighbors(i)
            .iter()
            .filter(|p| p.1 != 0.0)
            .map(|p| p.1.abs().powf(-metric.exponent))
            .collect();
        d.sort_by(f64::total_cmp);
        d.truncate(k);
        d
    };
    if dists.len() < k {
        return Err(Error::DisconnectedGraph { site: i });
    }
    Ok(dists)
}
