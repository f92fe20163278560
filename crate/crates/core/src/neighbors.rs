//! Exact Euclidean k-nearest neighbours by blocked brute force.

use ndarray::ArrayView2;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NeighborError {
    #[error("k = {k} must satisfy 1 <= k < n = {n}")]
    InvalidK { k: usize, n: usize },
}

/// Query rows processed together; keeps the working set of one block in cache.
const BLOCK: usize = 64;

/// Neighbour lists stored row-major, `k` entries per point, self excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph {
    k: usize,
    indices: Vec<usize>,
    distances: Vec<f64>,
}

impl KnnGraph {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_points(&self) -> usize {
        self.indices.len() / self.k
    }

    pub fn indices(&self, i: usize) -> &[usize] {
        &self.indices[i * self.k..(i + 1) * self.k]
    }

    /// Distances to the neighbours of `i`, non-decreasing.
    pub fn distances(&self, i: usize) -> &[f64] {
        &self.distances[i * self.k..(i + 1) * self.k]
    }
}

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Exact kNN for every row of `points`. Ties are broken by the lower index so
/// the result does not depend on thread scheduling.
pub fn exact_knn(points: ArrayView2<'_, f64>, k: usize) -> Result<KnnGraph, NeighborError> {
    let n = points.nrows();
    if k == 0 || k >= n {
        return Err(NeighborError::InvalidK { k, n });
    }
    let owned;
    let data: &[f64] = match points.as_slice() {
        Some(s) => s,
        None => {
            owned = points.as_standard_layout().to_owned();
            owned.as_slice().expect("standard layout")
        }
    };
    let dim = points.ncols();
    let row = |i: usize| &data[i * dim..(i + 1) * dim];

    let blocks: Vec<(Vec<usize>, Vec<f64>)> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let start = b * BLOCK;
            let end = (start + BLOCK).min(n);
            let mut idx_out = Vec::with_capacity((end - start) * k);
            let mut dist_out = Vec::with_capacity((end - start) * k);
            let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n);
            for q in start..end {
                cand.clear();
                let qrow = row(q);
                cand.extend((0..n).filter(|&j| j != q).map(|j| (euclidean(qrow, row(j)), j)));
                let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                if cand.len() > k {
                    cand.select_nth_unstable_by(k - 1, cmp);
                    cand.truncate(k);
                }
                cand.sort_unstable_by(cmp);
                idx_out.extend(cand.iter().map(|c| c.1));
                dist_out.extend(cand.iter().map(|c| c.0));
            }
            (idx_out, dist_out)
        })
        .collect();

    let mut indices = Vec::with_capacity(n * k);
    let mut distances = Vec::with_capacity(n * k);
    for (i, d) in blocks {
        indices.extend(i);
        distances.extend(d);
    }
    Ok(KnnGraph { k, indices, distances })
}
