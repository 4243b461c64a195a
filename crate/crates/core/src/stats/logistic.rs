use nalgebra::{Matrix4, Vector4};

use super::correlation::{mean, median, plcc, rmse, sample_std};
use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MonotonicMapKind {
    /// `(β1 − β2) / (1 + exp(−(s − β3)/|β4|)) + β2`
    Logistic([f64; 4]),
    Affine { slope: f64, intercept: f64 },
}

/// A fitted score → MOS mapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicMap {
    pub kind: MonotonicMapKind,
    /// Set when the logistic fit was worse than a straight line and the
    /// affine map was used instead.
    pub fallback: bool,
}

fn logistic(beta: &[f64; 4], s: f64) -> f64 {
    (beta[0] - beta[1]) / (1.0 + (-(s - beta[2]) / beta[3].abs()).exp()) + beta[1]
}

impl MonotonicMap {
    pub fn apply(&self, s: f64) -> f64 {
        match self.kind {
            MonotonicMapKind::Logistic(beta) => logistic(&beta, s),
            MonotonicMapKind::Affine { slope, intercept } => slope * s + intercept,
        }
    }

    pub fn apply_all(&self, scores: &[f64]) -> Vec<f64> {
        scores.iter().map(|&s| self.apply(s)).collect()
    }
}

fn affine_fit(s: &[f64], q: &[f64]) -> (f64, f64) {
    let (ms, mq) = (mean(s), mean(q));
    let sxx: f64 = s.iter().map(|v| (v - ms).powi(2)).sum();
    let sxy: f64 = s.iter().zip(q).map(|(a, b)| (a - ms) * (b - mq)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, mq - slope * ms)
}

fn sse(beta: &[f64; 4], s: &[f64], q: &[f64]) -> f64 {
    s.iter().zip(q).map(|(&x, &y)| (logistic(beta, x) - y).powi(2)).sum()
}

/// Levenberg–Marquardt on the sum of squared residuals.
fn levenberg_marquardt(mut beta: [f64; 4], s: &[f64], q: &[f64]) -> [f64; 4] {
    let mut cost = sse(&beta, s, q);
    let mut lambda = 1e-3;
    for _ in 0..MAX_ITERATIONS {
        let mut jtj = Matrix4::<f64>::zeros();
        let mut jtr = Vector4::<f64>::zeros();
        let b4 = beta[3].abs();
        for (&x, &y) in s.iter().zip(q) {
            let u = (-(x - beta[2]) / b4).exp();
            let sig = if u.is_finite() { 1.0 / (1.0 + u) } else { 0.0 };
            let dsig = sig * (1.0 - sig);
            let amp = beta[0] - beta[1];
            let grad = Vector4::new(
                sig,
                1.0 - sig,
                -amp * dsig / b4,
                -amp * dsig * (x - beta[2]) / (b4 * b4) * beta[3].signum(),
            );
            let r = amp * sig + beta[1] - y;
            jtj += grad * grad.transpose();
            jtr += grad * r;
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj;
            for i in 0..4 {
                a[(i, i)] += lambda * (1.0 + jtj[(i, i)]);
            }
            let Some(step) = a.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let candidate = [
                beta[0] + step[0],
                beta[1] + step[1],
                beta[2] + step[2],
                beta[3] + step[3],
            ];
            let c = sse(&candidate, s, q);
            if c.is_finite() && c < cost && candidate[3] != 0.0 {
                let rel = (cost - c) / cost.max(f64::MIN_POSITIVE);
                beta = candidate;
                cost = c;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if rel < 1e-14 {
                    return beta;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    beta
}

/// Fits the four-parameter logistic from objective scores to MOS.
///
/// Two starts are tried: one spanning the MOS range around the median
/// score, and one wide enough to be nearly affine over the data. If the
/// best logistic is worse than a least-squares line the line is returned
/// with `fallback` set.
pub fn fit_logistic(scores: &[f64], mos: &[f64]) -> Result<MonotonicMap> {
    if scores.len() != mos.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} scores but {} MOS values",
            scores.len(),
            mos.len()
        )));
    }
    if scores.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "logistic fit needs at least 5 points, got {}",
            scores.len()
        )));
    }
    if scores.iter().chain(mos).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("logistic fit input contains non-finite values".into()));
    }
    let (slope, intercept) = affine_fit(scores, mos);
    let affine = MonotonicMap {
        kind: MonotonicMapKind::Affine { slope, intercept },
        fallback: true,
    };
    let spread = sample_std(scores);
    if spread == 0.0 {
        return Ok(affine);
    }

    let (lo, hi) = mos.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let decreasing = plcc(scores, mos).is_some_and(|r| r < 0.0);
    let (b1, b2) = if decreasing { (lo, hi) } else { (hi, lo) };
    let centre = median(scores);
    // Near-affine start: logistic slope at the centre is (β1 − β2)/(4β4).
    let wide = 10.0 * spread;
    let near_affine = [
        mean(mos) + 2.0 * slope * wide,
        mean(mos) - 2.0 * slope * wide,
        mean(scores),
        wide,
    ];
    let starts = [[b1, b2, centre, spread / 4.0], near_affine];

    let mut best: Option<([f64; 4], f64)> = None;
    for start in starts {
        let beta = levenberg_marquardt(start, scores, mos);
        let err = sse(&beta, scores, mos);
        if err.is_finite() && best.is_none_or(|(_, e)| err < e) {
            best = Some((beta, err));
        }
    }
    let affine_rmse = rmse(&affine.apply_all(scores), mos);
    match best {
        Some((beta, err)) if (err / scores.len() as f64).sqrt() <= affine_rmse + 1e-9 => Ok(MonotonicMap {
            kind: MonotonicMapKind::Logistic(beta),
            fallback: false,
        }),
        _ => Ok(affine),
    }
}
