//! Fit of the low-dimensional kernel `q(d) = 1 / (1 + a d^(2b))`.

use super::UmapError;

const SAMPLES: usize = 300;
const SPAN: f64 = 3.0;
const MAX_ITERS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveParams {
    pub a: f64,
    pub b: f64,
    /// Root-mean-square residual of the fit over the sample grid.
    pub rms: f64,
}

impl CurveParams {
    pub fn kernel(&self, d: f64) -> f64 {
        1.0 / (1.0 + self.a * d.powf(2.0 * self.b))
    }
}

/// Target curve: 1 up to `min_dist`, exponential decay afterwards.
pub fn target_curve(min_dist: f64) -> (Vec<f64>, Vec<f64>) {
    let xs: Vec<f64> = (0..SAMPLES).map(|i| SPAN * i as f64 / (SAMPLES - 1) as f64).collect();
    let ys = xs.iter().map(|&x| if x <= min_dist { 1.0 } else { (-(x - min_dist)).exp() }).collect();
    (xs, ys)
}

fn sse(xs: &[f64], ys: &[f64], a: f64, b: f64) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let r = 1.0 / (1.0 + a * x.powf(2.0 * b)) - y;
            r * r
        })
        .sum()
}

/// Levenberg–Marquardt least squares for `(a, b)`.
pub fn fit_curve(min_dist: f64) -> Result<CurveParams, UmapError> {
    if !(min_dist > 0.0 && min_dist <= 1.0) {
        return Err(UmapError::InvalidConfig(format!("min_dist {min_dist} outside (0, 1]")));
    }
    let (xs, ys) = target_curve(min_dist);
    let (mut a, mut b) = (1.0f64, 1.0f64);
    let mut cost = sse(&xs, &ys, a, b);
    let mut lambda = 1e-3;
    for _ in 0..MAX_ITERS {
        // Normal equations J^T J δ = -J^T r with the 2×2 system solved directly.
        let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&x, &y) in xs.iter().zip(&ys) {
            let p = if x > 0.0 { x.powf(2.0 * b) } else { 0.0 };
            let denom = 1.0 + a * p;
            let f = 1.0 / denom;
            let r = f - y;
            let da = -p / (denom * denom);
            let db = if x > 0.0 { -a * p * 2.0 * x.ln() / (denom * denom) } else { 0.0 };
            jaa += da * da;
            jab += da * db;
            jbb += db * db;
            ga += da * r;
            gb += db * r;
        }
        let mut improved = false;
        for _ in 0..30 {
            let (maa, mbb) = (jaa * (1.0 + lambda), jbb * (1.0 + lambda));
            let det = maa * mbb - jab * jab;
            if det.abs() < f64::MIN_POSITIVE {
                lambda *= 10.0;
                continue;
            }
            let step_a = -(mbb * ga - jab * gb) / det;
            let step_b = -(maa * gb - jab * ga) / det;
            let (na, nb) = (a + step_a, b + step_b);
            if na > 0.0 && nb > 0.0 {
                let new_cost = sse(&xs, &ys, na, nb);
                if new_cost < cost {
                    let rel = (cost - new_cost) / cost.max(f64::MIN_POSITIVE);
                    a = na;
                    b = nb;
                    cost = new_cost;
                    lambda = (lambda / 10.0).max(1e-12);
                    improved = true;
                    if rel < 1e-14 {
                        return Ok(CurveParams { a, b, rms: (cost / SAMPLES as f64).sqrt() });
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            // No downhill step at any damping: a stationary point.
            return Ok(CurveParams { a, b, rms: (cost / SAMPLES as f64).sqrt() });
        }
    }
    Err(UmapError::CurveFit { min_dist, rms: (cost / SAMPLES as f64).sqrt() })
}
