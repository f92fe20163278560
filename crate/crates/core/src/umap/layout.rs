//! Stochastic gradient descent on the fuzzy cross-entropy with negative sampling.

use std::cell::Cell;
use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::curve::{fit_curve, CurveParams};
use super::fuzzy::FuzzyGraph;
use super::{Init, LayoutConfig, UmapError};

/// Per-coordinate update bound.
pub const CLIP: f64 = 4.0;
/// Squared-distance floor used when evaluating `q` for the loss estimate.
const Q_DIST_FLOOR: f64 = 1e-10;
/// Offset in the repulsive gradient denominator.
const REPULSION_EPS: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutResult {
    pub coords: Array2<f64>,
    pub curve: CurveParams,
    /// Sampled cross-entropy per epoch that processed at least one edge:
    /// mean of `-ln q` over positive samples and `-ln(1 - q)` over negatives.
    pub loss_history: Vec<f64>,
}

impl LayoutResult {
    /// Mean loss over the first and last tenth of the recorded epochs.
    pub fn loss_deciles(&self) -> (f64, f64) {
        let h = &self.loss_history;
        let m = (h.len() / 10).max(1);
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        (mean(&h[..m]), mean(&h[h.len() - m..]))
    }
}

/// Shared coordinate storage; `Cell` for the sequential path and relaxed
/// atomics for the parallel path, where concurrent updates may interleave.
trait Coords: Sync {
    fn get(&self, i: usize) -> f64;
    fn add(&self, i: usize, v: f64);
}

struct SeqCoords(Vec<Cell<f64>>);

// Only ever touched from one thread; the bound is needed by the trait.
unsafe impl Sync for SeqCoords {}

impl Coords for SeqCoords {
    #[inline]
    fn get(&self, i: usize) -> f64 {
        self.0[i].get()
    }
    #[inline]
    fn add(&self, i: usize, v: f64) {
        self.0[i].set(self.0[i].get() + v);
    }
}

struct AtomicCoords(Vec<AtomicU64>);

impl Coords for AtomicCoords {
    #[inline]
    fn get(&self, i: usize) -> f64 {
        f64::from_bits(self.0[i].load(Ordering::Relaxed))
    }
    #[inline]
    fn add(&self, i: usize, v: f64) {
        // Load-then-store: lost updates are tolerated, as in lock-free SGD.
        let cur = self.get(i);
        self.0[i].store((cur + v).to_bits(), Ordering::Relaxed);
    }
}

#[inline]
fn clip(v: f64) -> f64 {
    v.clamp(-CLIP, CLIP)
}

struct Schedule {
    heads: Vec<usize>,
    tails: Vec<usize>,
    epochs_per_sample: Vec<f64>,
}

fn schedule(graph: &FuzzyGraph, n_epochs: usize) -> Schedule {
    let max_w = graph.entries().map(|e| e.2).fold(0.0, f64::max);
    let cutoff = max_w / n_epochs as f64;
    let mut s = Schedule { heads: Vec::new(), tails: Vec::new(), epochs_per_sample: Vec::new() };
    for (i, j, w) in graph.entries() {
        if w >= cutoff && w > 0.0 {
            s.heads.push(i);
            s.tails.push(j);
            s.epochs_per_sample.push(max_w / w);
        }
    }
    s
}

struct Kernel {
    a: f64,
    b: f64,
    dim: usize,
    n: usize,
}

impl Kernel {
    fn dist2<C: Coords>(&self, c: &C, i: usize, j: usize) -> f64 {
        (0..self.dim).map(|d| (c.get(i * self.dim + d) - c.get(j * self.dim + d)).powi(2)).sum()
    }

    fn q(&self, dist2: f64) -> f64 {
        1.0 / (1.0 + self.a * dist2.max(Q_DIST_FLOOR).powf(self.b))
    }

    /// Processes one edge if due at `epoch`; returns (loss sum, sample count).
    /// `st` holds (next sample epoch, next negative epoch, epochs per negative).
    #[allow(clippy::too_many_arguments)]
    fn step<C: Coords>(
        &self,
        c: &C,
        head: usize,
        tail: usize,
        eps: f64,
        st: &mut (f64, f64, f64),
        epoch: usize,
        alpha: f64,
        rng: &mut ChaCha8Rng,
    ) -> (f64, usize) {
        let (next_sample, next_negative, per_negative) = (&mut st.0, &mut st.1, st.2);
        if *next_sample > epoch as f64 {
            return (0.0, 0);
        }
        let (a, b, dim) = (self.a, self.b, self.dim);
        let d2 = self.dist2(c, head, tail);
        let mut loss = -self.q(d2).ln();
        let mut count = 1;
        let coeff = if d2 > 0.0 { -2.0 * a * b * d2.powf(b - 1.0) / (a * d2.powf(b) + 1.0) } else { 0.0 };
        for d in 0..dim {
            let diff = c.get(head * dim + d) - c.get(tail * dim + d);
            let g = clip(coeff * diff);
            c.add(head * dim + d, g * alpha);
            c.add(tail * dim + d, -g * alpha);
        }
        *next_sample += eps;

        let n_neg = ((epoch as f64 - *next_negative) / per_negative).floor().max(0.0) as usize;
        for _ in 0..n_neg {
            let other = rng.gen_range(0..self.n);
            if other == head {
                continue;
            }
            let d2 = self.dist2(c, head, other);
            loss += -(1.0 - self.q(d2)).ln();
            count += 1;
            let coeff = if d2 > 0.0 { 2.0 * b / ((REPULSION_EPS + d2) * (a * d2.powf(b) + 1.0)) } else { 0.0 };
            for d in 0..dim {
                let g = if coeff > 0.0 {
                    clip(coeff * (c.get(head * dim + d) - c.get(other * dim + d)))
                } else {
                    CLIP
                };
                c.add(head * dim + d, g * alpha);
            }
        }
        *next_negative += n_neg as f64 * per_negative;
        (loss, count)
    }
}

fn initial_coords(n: usize, dim: usize, init: Init, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match init {
        Init::Gaussian { sigma } => {
            let normal = Normal::new(0.0, sigma).expect("positive sigma");
            (0..n * dim).map(|_| normal.sample(rng)).collect()
        }
        Init::Uniform { half_width } => (0..n * dim).map(|_| rng.gen_range(-half_width..half_width)).collect(),
    }
}

/// Lays out the graph in `cfg.n_components` dimensions.
///
/// Sequential mode is bit-reproducible for a fixed seed. Parallel mode
/// splits each epoch's edges into chunks that update shared coordinates
/// without synchronization, trading reproducibility for throughput.
pub fn optimize_layout(graph: &FuzzyGraph, cfg: &LayoutConfig) -> Result<LayoutResult, UmapError> {
    let n = graph.n_points();
    let dim = cfg.n_components;
    let n_epochs = cfg.epochs_for(n);
    if n_epochs == 0 {
        return Err(UmapError::InvalidConfig("n_epochs must be at least 1".into()));
    }
    let curve = fit_curve(cfg.min_dist)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = initial_coords(n, dim, cfg.init, &mut rng);
    let sched = schedule(graph, n_epochs);
    let mut state: Vec<(f64, f64, f64)> = sched
        .epochs_per_sample
        .iter()
        .map(|&e| (e, e / cfg.negative_sample_rate as f64, e / cfg.negative_sample_rate as f64))
        .collect();
    let kernel = Kernel { a: curve.a, b: curve.b, dim, n };
    let mut loss_history = Vec::with_capacity(n_epochs);

    let coords: Vec<f64> = if cfg.parallel {
        let c = AtomicCoords(init.into_iter().map(|v| AtomicU64::new(v.to_bits())).collect());
        let chunk = sched.heads.len().div_ceil(rayon::current_num_threads().max(1)).max(1);
        for epoch in 0..n_epochs {
            let alpha = cfg.learning_rate * (1.0 - epoch as f64 / n_epochs as f64);
            let (loss, count) = state
                .par_chunks_mut(chunk)
                .enumerate()
                .map(|(ci, st)| {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ ((epoch as u64) << 32) ^ ci as u64);
                    let base = ci * chunk;
                    let mut acc = (0.0, 0usize);
                    for (off, s) in st.iter_mut().enumerate() {
                        let e = base + off;
                        let (l, k) = kernel.step(&c, sched.heads[e], sched.tails[e], sched.epochs_per_sample[e], s, epoch, alpha, &mut rng);
                        acc.0 += l;
                        acc.1 += k;
                    }
                    acc
                })
                .reduce(|| (0.0, 0), |x, y| (x.0 + y.0, x.1 + y.1));
            if count > 0 {
                loss_history.push(loss / count as f64);
            }
        }
        c.0.into_iter().map(|v| f64::from_bits(v.into_inner())).collect()
    } else {
        let c = SeqCoords(init.into_iter().map(Cell::new).collect());
        for epoch in 0..n_epochs {
            let alpha = cfg.learning_rate * (1.0 - epoch as f64 / n_epochs as f64);
            let (mut loss, mut count) = (0.0, 0usize);
            for (e, s) in state.iter_mut().enumerate() {
                let (l, k) = kernel.step(&c, sched.heads[e], sched.tails[e], sched.epochs_per_sample[e], s, epoch, alpha, &mut rng);
                loss += l;
                count += k;
            }
            if count > 0 {
                loss_history.push(loss / count as f64);
            }
        }
        c.0.into_iter().map(Cell::into_inner).collect()
    };

    if coords.iter().any(|v| !v.is_finite()) {
        return Err(UmapError::NonFinite);
    }
    let coords = Array2::from_shape_vec((n, dim), coords).expect("n × dim");
    Ok(LayoutResult { coords, curve, loss_history })
}
