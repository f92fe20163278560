//! Density-based hierarchical clustering over mutual reachability distances.

mod tree;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::neighbors::{euclidean, exact_knn, NeighborError};

pub use tree::{
    condense, label_points, lambda_of, select_clusters, single_linkage, ClusterLabels, ClusterNode,
    CondensedEdge, CondensedTree, Merge, LAMBDA_CAP,
};

#[derive(Debug, Error, PartialEq)]
pub enum HdbscanError {
    #[error("min_samples = {min_samples} must satisfy 1 <= min_samples < n = {n}")]
    InvalidMinSamples { min_samples: usize, n: usize },
    #[error("min_cluster_size must be >= 2, got {0}")]
    InvalidMinClusterSize(usize),
    #[error(transparent)]
    Neighbor(#[from] NeighborError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HdbscanConfig {
    pub min_cluster_size: usize,
    /// Defaults to `min_cluster_size`.
    pub min_samples: Option<usize>,
    /// Lets the root compete in cluster selection.
    pub allow_single_cluster: bool,
}

impl Default for HdbscanConfig {
    fn default() -> Self {
        HdbscanConfig { min_cluster_size: 5, min_samples: None, allow_single_cluster: false }
    }
}

impl HdbscanConfig {
    pub fn new(min_cluster_size: usize) -> Self {
        HdbscanConfig { min_cluster_size, ..Default::default() }
    }

    /// Effective `min_samples` for `n` points, capped at `n - 1`.
    pub fn min_samples_for(&self, n: usize) -> usize {
        self.min_samples.unwrap_or(self.min_cluster_size).min(n.saturating_sub(1)).max(1)
    }
}

/// Distance from each point to its `min_samples`-th nearest other point.
pub fn core_distances(points: ArrayView2<f64>, min_samples: usize) -> Result<Vec<f64>, HdbscanError> {
    let n = points.nrows();
    if min_samples == 0 || min_samples >= n {
        return Err(HdbscanError::InvalidMinSamples { min_samples, n });
    }
    let knn = exact_knn(points, min_samples)?;
    Ok((0..n).map(|i| knn.distances(i)[min_samples - 1]).collect())
}

#[inline]
pub fn mutual_reachability(d: f64, core_i: f64, core_j: f64) -> f64 {
    d.max(core_i).max(core_j)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MstEdge {
    /// Lower endpoint.
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

impl MstEdge {
    fn new(i: usize, j: usize, weight: f64) -> Self {
        MstEdge { a: i.min(j), b: i.max(j), weight }
    }
}

/// Remaining-vertex count above which Prim's relaxation step runs in parallel.
const PAR_THRESHOLD: usize = 4096;

/// Prim's algorithm on a complete graph given by `weight`, O(n²) time and
/// O(n) memory. Among equal weights the edge with the smaller `(a, b)` wins,
/// so the tree is independent of evaluation order.
pub fn prim_mst<W>(n: usize, weight: W) -> Vec<MstEdge>
where
    W: Fn(usize, usize) -> f64 + Sync,
{
    if n < 2 {
        return Vec::new();
    }
    // Per outside vertex: (best weight, (a, b) of that edge, tree endpoint).
    let key = |w: f64, u: usize, v: usize| (w, u.min(v), u.max(v));
    let better = |x: (f64, usize, usize), y: (f64, usize, usize)| x.0 < y.0 || (x.0 == y.0 && (x.1, x.2) < (y.1, y.2));
    let mut outside: Vec<(usize, (f64, usize, usize), usize)> =
        (1..n).map(|v| (v, key(weight(0, v), 0, v), 0)).collect();
    let mut edges = Vec::with_capacity(n - 1);
    while !outside.is_empty() {
        let mut best = 0;
        for (pos, o) in outside.iter().enumerate().skip(1) {
            if better(o.1, outside[best].1) {
                best = pos;
            }
        }
        let (v, k, u) = outside.swap_remove(best);
        edges.push(MstEdge::new(u, v, k.0));
        let relax = |o: &mut (usize, (f64, usize, usize), usize)| {
            let cand = key(weight(v, o.0), v, o.0);
            if better(cand, o.1) {
                o.1 = cand;
                o.2 = v;
            }
        };
        if outside.len() > PAR_THRESHOLD {
            outside.par_iter_mut().for_each(relax);
        } else {
            outside.iter_mut().for_each(relax);
        }
    }
    edges
}

/// MST of the mutual reachability graph of `points`.
pub fn build_mst(points: ArrayView2<f64>, cores: &[f64]) -> Vec<MstEdge> {
    let owned = points.as_standard_layout().to_owned();
    let dim = owned.ncols();
    let data = owned.as_slice().expect("standard layout");
    let row = |i: usize| &data[i * dim..(i + 1) * dim];
    prim_mst(points.nrows(), |i, j| mutual_reachability(euclidean(row(i), row(j)), cores[i], cores[j]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HdbscanOutput {
    pub labels: ClusterLabels,
    pub tree: CondensedTree,
    pub mst: Vec<MstEdge>,
    pub min_samples: usize,
}

/// Clusters the rows of `points`. Fewer points than `min_cluster_size`
/// yields a root-only tree and all outliers.
pub fn hdbscan(points: ArrayView2<f64>, cfg: &HdbscanConfig) -> Result<HdbscanOutput, HdbscanError> {
    if cfg.min_cluster_size < 2 {
        return Err(HdbscanError::InvalidMinClusterSize(cfg.min_cluster_size));
    }
    let n = points.nrows();
    let min_samples = cfg.min_samples_for(n);
    if n < 2 {
        let tree = condense(n, &[], cfg.min_cluster_size);
        return Ok(HdbscanOutput { labels: ClusterLabels::all_noise(n), tree, mst: Vec::new(), min_samples });
    }
    let cores = core_distances(points, min_samples)?;
    let mst = build_mst(points, &cores);
    let merges = single_linkage(n, &mst);
    let tree = condense(n, &merges, cfg.min_cluster_size);
    let selected = select_clusters(&tree, cfg.allow_single_cluster);
    let labels = label_points(&tree, &selected);
    Ok(HdbscanOutput { labels, tree, mst, min_samples })
}
