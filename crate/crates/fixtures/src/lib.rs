//! Seeded synthetic fixtures and independent oracles shared by the test suites.
//!
//! Nothing here depends on `greenai-core`: every oracle is a direct,
//! deliberately naive evaluation of the quantity it checks, so a bug in the
//! library cannot leak into its own reference values.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub type Points = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Isotropic Gaussian blobs around the given centers. Labels are the center index.
pub fn gaussian_blobs(centers: &[Vec<f64>], per_blob: usize, sigma: f64, seed: u64) -> (Points, Vec<i64>) {
    let mut rng = rng(seed);
    let normal = Normal::new(0.0, sigma).unwrap();
    let mut pts = Vec::with_capacity(centers.len() * per_blob);
    let mut labels = Vec::with_capacity(centers.len() * per_blob);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per_blob {
            pts.push(center.iter().map(|&m| m + normal.sample(&mut rng)).collect());
            labels.push(c as i64);
        }
    }
    (pts, labels)
}

/// Appends `count` points drawn uniformly from the box `[lo, hi]^dim`, labelled -1.
pub fn add_uniform_noise(pts: &mut Points, labels: &mut Vec<i64>, count: usize, lo: f64, hi: f64, seed: u64) {
    let dim = pts.first().map_or(2, Vec::len);
    let mut rng = rng(seed);
    for _ in 0..count {
        pts.push((0..dim).map(|_| rng.gen_range(lo..hi)).collect());
        labels.push(-1);
    }
}

/// Random centers spaced so that every pair is at least `min_sep` apart.
pub fn separated_centers(k: usize, dim: usize, min_sep: f64, seed: u64) -> Points {
    let mut rng = rng(seed);
    let mut centers: Points = Vec::new();
    let span = min_sep * k as f64;
    while centers.len() < k {
        let c: Vec<f64> = (0..dim).map(|_| rng.gen_range(-span..span)).collect();
        if centers.iter().all(|o| euclid(o, &c) >= min_sep) {
            centers.push(c);
        }
    }
    centers
}

/// Abstracts built from disjoint planted vocabularies plus a shared pool.
///
/// Each document draws `own_share` of its tokens from its topic's vocabulary
/// and the rest from a pool common to all topics, then wraps them in patent
/// boilerplate so the preprocessing stage has something to strip.
pub struct PlantedCorpus {
    pub abstracts: Vec<String>,
    pub labels: Vec<i64>,
    pub vocabularies: Vec<Vec<String>>,
}

pub fn planted_corpus(n_docs: usize, n_topics: usize, words_per_topic: usize, doc_len: usize, seed: u64) -> PlantedCorpus {
    const STEMS: [&str; 6] = ["turbine", "battery", "grid", "vehicle", "sensor", "carbon"];
    const SHARED: [&str; 12] = [
        "system", "control", "data", "energy", "signal", "unit", "module", "value", "network", "power",
        "device", "model",
    ];
    let vocabularies: Vec<Vec<String>> = (0..n_topics)
        .map(|t| (0..words_per_topic).map(|w| format!("{}{:02}", STEMS[t % STEMS.len()], w + 100 * (t / STEMS.len()))).collect())
        .collect();
    let mut rng = rng(seed);
    let mut abstracts = Vec::with_capacity(n_docs);
    let mut labels = Vec::with_capacity(n_docs);
    for d in 0..n_docs {
        let topic = d % n_topics;
        let mut words: Vec<&str> = Vec::with_capacity(doc_len);
        for _ in 0..doc_len {
            if rng.gen_bool(0.7) {
                words.push(vocabularies[topic].choose(&mut rng).unwrap());
            } else {
                words.push(SHARED.choose(&mut rng).unwrap());
            }
        }
        abstracts.push(format!("The invention herein relates to a {}.", words.join(" ")));
        labels.push(topic as i64);
    }
    PlantedCorpus { abstracts, labels, vocabularies }
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Adjusted Rand index from the pair-counting contingency table.
pub fn adjusted_rand_index(a: &[i64], b: &[i64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let mut ua: Vec<i64> = a.to_vec();
    ua.sort_unstable();
    ua.dedup();
    let mut ub: Vec<i64> = b.to_vec();
    ub.sort_unstable();
    ub.dedup();
    let mut table = vec![vec![0u64; ub.len()]; ua.len()];
    for i in 0..n {
        let r = ua.binary_search(&a[i]).unwrap();
        let c = ub.binary_search(&b[i]).unwrap();
        table[r][c] += 1;
    }
    let comb2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let sum_cells: f64 = table.iter().flatten().map(|&x| comb2(x)).sum();
    let sum_rows: f64 = table.iter().map(|r| comb2(r.iter().sum())).sum();
    let sum_cols: f64 = (0..ub.len()).map(|c| comb2(table.iter().map(|r| r[c]).sum())).sum();
    let total = comb2(n as u64);
    let expected = sum_rows * sum_cols / total;
    let max = 0.5 * (sum_rows + sum_cols);
    if (max - expected).abs() < f64::EPSILON {
        return 1.0;
    }
    (sum_cells - expected) / (max - expected)
}

/// Mean silhouette coefficient over all points (singleton clusters score 0).
pub fn silhouette(points: &[Vec<f64>], labels: &[i64]) -> f64 {
    let n = points.len();
    let mut clusters: Vec<i64> = labels.to_vec();
    clusters.sort_unstable();
    clusters.dedup();
    let mut total = 0.0;
    for i in 0..n {
        let mut sums = vec![0.0; clusters.len()];
        let mut counts = vec![0usize; clusters.len()];
        for j in 0..n {
            if i == j {
                continue;
            }
            let c = clusters.binary_search(&labels[j]).unwrap();
            sums[c] += euclid(&points[i], &points[j]);
            counts[c] += 1;
        }
        let own = clusters.binary_search(&labels[i]).unwrap();
        if counts[own] == 0 {
            continue;
        }
        let a = sums[own] / counts[own] as f64;
        let b = (0..clusters.len())
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        total += (b - a) / a.max(b);
    }
    total / n as f64
}

fn ranked_neighbors(points: &[Vec<f64>], i: usize) -> Vec<usize> {
    let mut others: Vec<usize> = (0..points.len()).filter(|&j| j != i).collect();
    others.sort_by(|&x, &y| {
        euclid(&points[i], &points[x])
            .partial_cmp(&euclid(&points[i], &points[y]))
            .unwrap()
            .then(x.cmp(&y))
    });
    others
}

/// Trustworthiness of a low-dimensional embedding with respect to `k` neighbors.
pub fn trustworthiness(high: &[Vec<f64>], low: &[Vec<f64>], k: usize) -> f64 {
    let n = high.len();
    let mut penalty = 0.0;
    for i in 0..n {
        let high_rank = ranked_neighbors(high, i);
        let low_nn: Vec<usize> = ranked_neighbors(low, i).into_iter().take(k).collect();
        for j in low_nn {
            let r = high_rank.iter().position(|&x| x == j).unwrap() + 1;
            if r > k {
                penalty += (r - k) as f64;
            }
        }
    }
    let (n, k) = (n as f64, k as f64);
    1.0 - 2.0 / (n * k * (2.0 * n - 3.0 * k - 1.0)) * penalty
}

/// Total weight of a minimum spanning tree by Kruskal over the complete graph.
pub fn kruskal_mst_weight(n: usize, weight: impl Fn(usize, usize) -> f64) -> f64 {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            edges.push((weight(i, j), i, j));
        }
    }
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            x = p[x];
        }
        x
    }
    let mut total = 0.0;
    for (w, i, j) in edges {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri] = rj;
            total += w;
        }
    }
    total
}

/// Gini as half the relative mean absolute difference over all ordered pairs.
pub fn gini_mean_abs_difference(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let mut s = 0.0;
    for a in x {
        for b in x {
            s += (a - b).abs();
        }
    }
    s / (2.0 * n * n * mean)
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    // Split into panels first so narrow peaks near `a` are not missed.
    let panels = 64;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let (lo, hi) = (a + p as f64 * h, a + (p + 1) as f64 * h);
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            rec(f, lo, hi, fa, fm, fb, simpson(fa, fm, fb, lo, hi), tol / panels as f64, 50)
        })
        .sum()
}

/// Mean of N(mu, s^2) truncated to `[0, inf)` by direct quadrature of both integrals.
///
/// The density is rescaled by its value at the mode of the truncated support so
/// that deep-tail truncations do not underflow.
pub fn truncated_normal_mean_quadrature(mu: f64, s: f64) -> f64 {
    let peak = mu.max(0.0);
    let log_peak = -(peak - mu) * (peak - mu) / (2.0 * s * s);
    let density = move |v: f64| (-(v - mu) * (v - mu) / (2.0 * s * s) - log_peak).exp();
    // Decay length of the truncated density near its mode.
    let width = if mu >= 0.0 { s } else { (s * s / -mu).min(s) };
    let upper = peak + 40.0 * width;
    let num = adaptive_simpson(&|v| v * density(v), 0.0, upper, 1e-16 * upper.max(1.0));
    let den = adaptive_simpson(&density, 0.0, upper, 1e-16);
    num / den
}

/// Solves `sum_j exp(-max(0, d_j - rho) / sigma) = target` by plain bisection on log(sigma).
pub fn bisect_bandwidth(distances: &[f64], rho: f64, target: f64) -> f64 {
    let sum = |sigma: f64| distances.iter().map(|&d| (-(d - rho).max(0.0) / sigma).exp()).sum::<f64>();
    let (mut lo, mut hi) = (-30.0f64, 30.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sum(mid.exp()) > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

/// Least-squares fit of `1 / (1 + a d^(2b))` by successive grid refinement.
pub fn curve_fit_grid(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let sse = |a: f64, b: f64| {
        xs.iter()
            .zip(ys)
            .map(|(&x, &y)| {
                let r = 1.0 / (1.0 + a * x.powf(2.0 * b)) - y;
                r * r
            })
            .sum::<f64>()
    };
    let (mut a0, mut a1, mut b0, mut b1) = (0.01, 5.0, 0.1, 3.0);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for _ in 0..40 {
        let steps = 40;
        for ia in 0..=steps {
            for ib in 0..=steps {
                let a = a0 + (a1 - a0) * ia as f64 / steps as f64;
                let b = b0 + (b1 - b0) * ib as f64 / steps as f64;
                let e = sse(a, b);
                if e < best.0 {
                    best = (e, a, b);
                }
            }
        }
        let (da, db) = ((a1 - a0) / 8.0, (b1 - b0) / 8.0);
        a0 = (best.1 - da).max(1e-6);
        a1 = best.1 + da;
        b0 = (best.2 - db).max(1e-6);
        b1 = best.2 + db;
    }
    (best.1, best.2, (best.0 / xs.len() as f64).sqrt())
}

/// Shuffled copy of `0..n`.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng(seed));
    p
}
