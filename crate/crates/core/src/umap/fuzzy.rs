//! Fuzzy simplicial set construction from a kNN graph.

use rayon::prelude::*;

use crate::neighbors::KnnGraph;

pub const SIGMA_MIN: f64 = 1e-8;
pub const SIGMA_MAX: f64 = 1e8;
const BISECTION_ITERS: usize = 64;
const BISECTION_TOL: f64 = 1e-5;

/// Local connectivity parameters of one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothKnn {
    /// Smallest positive neighbour distance (0 when every distance is 0).
    pub rho: f64,
    /// Bandwidth making the membership sum equal `log2(k)`.
    pub sigma: f64,
}

/// Membership sum `Σ exp(-max(0, d - rho) / sigma)` over a neighbour list.
pub fn membership_sum(distances: &[f64], rho: f64, sigma: f64) -> f64 {
    distances.iter().map(|&d| (-(d - rho).max(0.0) / sigma).exp()).sum()
}

/// Finds `sigma` with `Σ_j exp(-max(0, d_j - rho) / sigma) = log2(k)` by
/// bisection (doubling the upper bound until it brackets the root).
///
/// When no bandwidth can reach the target (every distance equal to `rho`,
/// for instance) the search runs into [`SIGMA_MIN`] and all memberships
/// saturate at 1.
pub fn calibrate_smooth_knn(distances: &[f64], k: usize) -> SmoothKnn {
    debug_assert!(distances.windows(2).all(|w| w[0] <= w[1]), "distances must be sorted");
    let rho = distances.iter().copied().find(|&d| d > 0.0).unwrap_or(0.0);
    let target = (k as f64).log2();
    let (mut lo, mut hi, mut mid) = (0.0f64, f64::INFINITY, 1.0f64);
    for _ in 0..BISECTION_ITERS {
        let psum = membership_sum(distances, rho, mid);
        if (psum - target).abs() < BISECTION_TOL {
            break;
        }
        if psum > target {
            hi = mid;
            mid = 0.5 * (lo + hi);
        } else {
            lo = mid;
            mid = if hi.is_infinite() { mid * 2.0 } else { 0.5 * (lo + hi) };
        }
    }
    SmoothKnn { rho, sigma: mid.clamp(SIGMA_MIN, SIGMA_MAX) }
}

/// Row-wise sparse memberships `p_{j|i}` before symmetrization.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedMemberships {
    pub rows: Vec<Vec<(usize, f64)>>,
}

/// Symmetric fuzzy graph with per-point calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyGraph {
    rows: Vec<Vec<(usize, f64)>>,
    pub rho: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl FuzzyGraph {
    pub fn n_points(&self) -> usize {
        self.rows.len()
    }

    /// Neighbours of `i` with their membership strengths, ascending by index.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = &self.rows[i];
        r.binary_search_by_key(&j, |&(c, _)| c).map_or(0.0, |p| r[p].1)
    }

    /// Every stored entry `(i, j, p_ij)`, both orientations included.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows.iter().enumerate().flat_map(|(i, r)| r.iter().map(move |&(j, w)| (i, j, w)))
    }

    pub fn n_entries(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }
}

/// Directed memberships `exp(-max(0, d - rho_i) / sigma_i)` for every kNN edge.
/// Entries that underflow to zero are dropped.
pub fn directed_memberships(knn: &KnnGraph) -> (DirectedMemberships, Vec<SmoothKnn>) {
    let n = knn.n_points();
    let k = knn.k();
    let per_point: Vec<(Vec<(usize, f64)>, SmoothKnn)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let d = knn.distances(i);
            let cal = calibrate_smooth_knn(d, k);
            let row = knn
                .indices(i)
                .iter()
                .zip(d)
                .map(|(&j, &dist)| (j, (-(dist - cal.rho).max(0.0) / cal.sigma).exp()))
                .filter(|&(_, w)| w > 0.0)
                .collect();
            (row, cal)
        })
        .collect();
    let (rows, cals) = per_point.into_iter().unzip();
    (DirectedMemberships { rows }, cals)
}

/// `p + q - pq`, evaluated as `hi + lo (1 - hi)` so it is symmetric in its
/// arguments bit for bit and exactly 1 when either input is 1.
fn t_conorm(p: f64, q: f64) -> f64 {
    let (hi, lo) = if p >= q { (p, q) } else { (q, p) };
    hi + lo * (1.0 - hi)
}

/// Probabilistic t-conorm `p + pᵀ - p ∘ pᵀ` applied entrywise.
pub fn fuzzy_union(directed: &DirectedMemberships) -> Vec<Vec<(usize, f64)>> {
    let n = directed.rows.len();
    let lookup = |i: usize, j: usize| -> f64 {
        directed.rows[i].iter().find(|&&(c, _)| c == j).map_or(0.0, |&(_, w)| w)
    };
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, row) in directed.rows.iter().enumerate() {
        for &(j, p) in row {
            let q = lookup(j, i);
            let s = t_conorm(p, q);
            rows[i].push((j, s));
            if q == 0.0 {
                // (j, i) is absent from j's list, so it would never be emitted from there.
                rows[j].push((i, s));
            }
        }
    }
    for r in &mut rows {
        r.sort_by_key(|&(j, _)| j);
        r.dedup_by_key(|&mut (j, _)| j);
    }
    rows
}

/// Full construction: calibration, directed memberships, symmetrization.
pub fn fuzzy_simplicial_set(knn: &KnnGraph) -> FuzzyGraph {
    let (directed, cals) = directed_memberships(knn);
    FuzzyGraph {
        rows: fuzzy_union(&directed),
        rho: cals.iter().map(|c| c.rho).collect(),
        sigma: cals.iter().map(|c| c.sigma).collect(),
    }
}
