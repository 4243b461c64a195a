//! Full-reference baselines: pixel MSE, SSIM, MS-SSIM, gradient difference
//! and deep-feature MSE / cosine similarity.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Frame, VideoRecord};
use crate::error::{Error, Result};
use crate::features::{features_for_image, FeatureExtractor};
use crate::mcs::cosine_similarity;

const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);
const MSSSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

fn check_dims(a: &Frame, b: &Frame) -> Result<()> {
    if a.same_dims(b) {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!(
            "{}x{} frame compared with {}x{} frame",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )))
    }
}

/// Mean squared error over all samples, on the 0–255 scale.
pub fn frame_mse(pred: &Frame, reference: &Frame) -> Result<f64> {
    check_dims(pred, reference)?;
    let sum: f64 = pred
        .samples()
        .iter()
        .zip(reference.samples())
        .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
        .sum();
    Ok(sum / pred.samples().len() as f64)
}

/// Which plane SSIM is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SsimChannels {
    /// BT.601 luma `0.299 R + 0.587 G + 0.114 B`.
    #[default]
    Luma,
    /// SSIM of each color channel, averaged.
    MeanRgb,
}

/// A single-channel `f64` image.
#[derive(Debug, Clone)]
struct Plane {
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl Plane {
    fn luma(frame: &Frame) -> Self {
        let data = frame
            .samples()
            .chunks_exact(Frame::CHANNELS)
            .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
            .collect();
        Self {
            h: frame.height(),
            w: frame.width(),
            data,
        }
    }

    fn channel(frame: &Frame, ch: usize) -> Self {
        let data = frame
            .samples()
            .chunks_exact(Frame::CHANNELS)
            .map(|p| p[ch] as f64)
            .collect();
        Self {
            h: frame.height(),
            w: frame.width(),
            data,
        }
    }

    fn map(&self, other: &Plane, f: impl Fn(f64, f64) -> f64) -> Plane {
        Plane {
            h: self.h,
            w: self.w,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// 2×2 average pooling, dropping an odd trailing row or column.
    fn downsample(&self) -> Plane {
        let (h, w) = (self.h / 2, self.w / 2);
        let mut data = Vec::with_capacity(h * w);
        for r in 0..h {
            for c in 0..w {
                let at = |rr: usize, cc: usize| self.data[rr * self.w + cc];
                data.push(
                    (at(2 * r, 2 * c) + at(2 * r, 2 * c + 1) + at(2 * r + 1, 2 * c) + at(2 * r + 1, 2 * c + 1)) / 4.0,
                );
            }
        }
        Plane { h, w, data }
    }

    /// Separable Gaussian filter over the valid region only.
    fn gaussian_valid(&self, kernel: &[f64]) -> Plane {
        let k = kernel.len();
        let (oh, ow) = (self.h + 1 - k, self.w + 1 - k);
        let mut rows = vec![0f64; self.h * ow];
        for r in 0..self.h {
            for c in 0..ow {
                rows[r * ow + c] = kernel
                    .iter()
                    .enumerate()
                    .map(|(i, g)| g * self.data[r * self.w + c + i])
                    .sum();
            }
        }
        let mut data = vec![0f64; oh * ow];
        for r in 0..oh {
            for c in 0..ow {
                data[r * ow + c] = kernel.iter().enumerate().map(|(i, g)| g * rows[(r + i) * ow + c]).sum();
            }
        }
        Plane { h: oh, w: ow, data }
    }
}

fn gaussian_kernel() -> [f64; WINDOW] {
    let mut k = [0f64; WINDOW];
    let centre = (WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - centre;
        *v = (-d * d / (2.0 * SIGMA * SIGMA)).exp();
    }
    let sum: f64 = k.iter().sum();
    k.map(|v| v / sum)
}

/// Mean SSIM and mean contrast-structure term of two planes.
fn ssim_planes(x: &Plane, y: &Plane) -> (f64, f64) {
    let g = gaussian_kernel();
    let mu_x = x.gaussian_valid(&g);
    let mu_y = y.gaussian_valid(&g);
    let xx = x.map(x, |a, b| a * b).gaussian_valid(&g);
    let yy = y.map(y, |a, b| a * b).gaussian_valid(&g);
    let xy = x.map(y, |a, b| a * b).gaussian_valid(&g);
    let n = mu_x.data.len();
    let (mut ssim, mut cs) = (0f64, 0f64);
    for i in 0..n {
        let (mx, my) = (mu_x.data[i], mu_y.data[i]);
        let vx = xx.data[i] - mx * mx;
        let vy = yy.data[i] - my * my;
        let cov = xy.data[i] - mx * my;
        let contrast_structure = (2.0 * cov + C2) / (vx + vy + C2);
        let luminance = (2.0 * mx * my + C1) / (mx * mx + my * my + C1);
        cs += contrast_structure;
        ssim += luminance * contrast_structure;
    }
    (ssim / n as f64, cs / n as f64)
}

fn planes(frame: &Frame, channels: SsimChannels) -> Vec<Plane> {
    match channels {
        SsimChannels::Luma => vec![Plane::luma(frame)],
        SsimChannels::MeanRgb => (0..Frame::CHANNELS).map(|c| Plane::channel(frame, c)).collect(),
    }
}

fn check_window(frame: &Frame) -> Result<()> {
    if frame.height().min(frame.width()) < WINDOW {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} frame is smaller than the {WINDOW}x{WINDOW} SSIM window",
            frame.height(),
            frame.width()
        )));
    }
    Ok(())
}

/// Mean SSIM and mean contrast-structure term, in that order.
pub fn frame_ssim_terms(pred: &Frame, reference: &Frame, channels: SsimChannels) -> Result<(f64, f64)> {
    check_dims(pred, reference)?;
    check_window(pred)?;
    let (px, rx) = (planes(pred, channels), planes(reference, channels));
    let parts: Vec<(f64, f64)> = px.iter().zip(&rx).map(|(a, b)| ssim_planes(a, b)).collect();
    let n = parts.len() as f64;
    Ok((
        parts.iter().map(|p| p.0).sum::<f64>() / n,
        parts.iter().map(|p| p.1).sum::<f64>() / n,
    ))
}

/// Gaussian-windowed SSIM (11×11, σ = 1.5) on BT.601 luma, averaged over
/// the valid region.
pub fn frame_ssim(pred: &Frame, reference: &Frame) -> Result<f64> {
    Ok(frame_ssim_terms(pred, reference, SsimChannels::Luma)?.0)
}

/// Number of dyadic scales MS-SSIM uses for an image of this size.
pub fn msssim_scales(height: usize, width: usize) -> usize {
    let mut side = height.min(width);
    let mut scales = 0;
    while scales < MSSSIM_WEIGHTS.len() && side >= WINDOW {
        scales += 1;
        side /= 2;
    }
    scales
}

/// Multi-scale SSIM on luma with the standard five weights. Small images
/// use fewer scales, with the leading weights renormalized to sum to one.
/// Negative contrast-structure terms are clamped to zero before the
/// weighted product.
pub fn frame_msssim(pred: &Frame, reference: &Frame) -> Result<f64> {
    check_dims(pred, reference)?;
    let scales = msssim_scales(pred.height(), pred.width());
    if scales < 2 {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} frame is too small for two MS-SSIM scales",
            pred.height(),
            pred.width()
        )));
    }
    let total: f64 = MSSSIM_WEIGHTS[..scales].iter().sum();
    let (mut x, mut y) = (Plane::luma(pred), Plane::luma(reference));
    let mut score = 1.0;
    for (level, weight) in MSSSIM_WEIGHTS[..scales].iter().enumerate() {
        let (ssim, cs) = ssim_planes(&x, &y);
        let term = if level + 1 == scales { ssim } else { cs };
        score *= term.max(0.0).powf(weight / total);
        if level + 1 < scales {
            x = x.downsample();
            y = y.downsample();
        }
    }
    Ok(score)
}

/// Mean absolute difference of forward-difference gradient magnitudes,
/// summed over both directions and all channels, divided by `H · W`.
pub fn gradient_difference(pred: &Frame, reference: &Frame) -> Result<f64> {
    check_dims(pred, reference)?;
    let (h, w) = (pred.height(), pred.width());
    if h < 2 || w < 2 {
        return Err(Error::ShapeMismatch(format!("{h}x{w} frame has no gradients in one direction")));
    }
    let grad = |f: &Frame, r: usize, c: usize, ch: usize, dr: usize, dc: usize| {
        (f.get(r + dr, c + dc, ch) as f64 - f.get(r, c, ch) as f64).abs()
    };
    let mut total = 0f64;
    for r in 0..h {
        for c in 0..w {
            for ch in 0..Frame::CHANNELS {
                if c + 1 < w {
                    total += (grad(reference, r, c, ch, 0, 1) - grad(pred, r, c, ch, 0, 1)).abs();
                }
                if r + 1 < h {
                    total += (grad(reference, r, c, ch, 1, 0) - grad(pred, r, c, ch, 1, 0)).abs();
                }
            }
        }
    }
    Ok(total / (h * w) as f64)
}

/// MSE between the flattened feature maps of two frames.
pub fn feature_mse(pred: &Frame, reference: &Frame, extractor: &dyn FeatureExtractor) -> Result<f64> {
    let (a, b) = (features_for_image(pred, extractor)?, features_for_image(reference, extractor)?);
    a.ensure_same_shape(&b)?;
    let sum: f64 = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
        .sum();
    Ok(sum / a.values().len() as f64)
}

/// Cosine similarity between the flattened feature maps of two frames.
pub fn feature_cosine(pred: &Frame, reference: &Frame, extractor: &dyn FeatureExtractor) -> Result<f64> {
    let (a, b) = (features_for_image(pred, extractor)?, features_for_image(reference, extractor)?);
    a.ensure_same_shape(&b)?;
    cosine_similarity(a.values(), b.values())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    HigherIsBetter,
    LowerIsBetter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrMetric {
    Mse,
    Ssim,
    MsSsim,
    GradientDifference,
    FeatureMse,
    FeatureCosine,
}

impl FrMetric {
    pub const ALL: [FrMetric; 6] = [
        FrMetric::Mse,
        FrMetric::Ssim,
        FrMetric::MsSsim,
        FrMetric::GradientDifference,
        FrMetric::FeatureMse,
        FrMetric::FeatureCosine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FrMetric::Mse => "mse",
            FrMetric::Ssim => "ssim",
            FrMetric::MsSsim => "ms-ssim",
            FrMetric::GradientDifference => "gradient-difference",
            FrMetric::FeatureMse => "feature-mse",
            FrMetric::FeatureCosine => "feature-cosine",
        }
    }

    pub fn polarity(self) -> Polarity {
        match self {
            FrMetric::Mse | FrMetric::GradientDifference | FrMetric::FeatureMse => Polarity::LowerIsBetter,
            FrMetric::Ssim | FrMetric::MsSsim | FrMetric::FeatureCosine => Polarity::HigherIsBetter,
        }
    }

    pub fn needs_features(self) -> bool {
        matches!(self, FrMetric::FeatureMse | FrMetric::FeatureCosine)
    }

    /// Scores one predicted frame against its reference.
    pub fn frame_score(self, pred: &Frame, reference: &Frame, extractor: Option<&dyn FeatureExtractor>) -> Result<f64> {
        let need = || {
            extractor.ok_or_else(|| Error::ProviderUnavailable(format!("{} needs a feature extractor", self.name())))
        };
        match self {
            FrMetric::Mse => frame_mse(pred, reference),
            FrMetric::Ssim => frame_ssim(pred, reference),
            FrMetric::MsSsim => frame_msssim(pred, reference),
            FrMetric::GradientDifference => gradient_difference(pred, reference),
            FrMetric::FeatureMse => feature_mse(pred, reference, need()?),
            FrMetric::FeatureCosine => feature_cosine(pred, reference, need()?),
        }
    }
}

impl fmt::Display for FrMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FrMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FrMetric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::parse("metric", format!("unknown full-reference metric {s:?}")))
    }
}

/// Per-predicted-frame scores of one video and their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrScore {
    pub per_frame: Vec<f64>,
    pub aggregate: f64,
    pub polarity: Polarity,
}

/// Applies `metric` to every predicted frame (index ≥ `N_c`) against the
/// reference frame at the same index.
pub fn fr_video_score(
    metric: FrMetric,
    pred: &VideoRecord,
    reference: &VideoRecord,
    extractor: Option<&dyn FeatureExtractor>,
) -> Result<FrScore> {
    if pred.frames.len() != reference.frames.len() {
        return Err(Error::ShapeMismatch(format!(
            "predicted video has {} frames, reference has {}",
            pred.frames.len(),
            reference.frames.len()
        )));
    }
    if pred.meta.n_context != reference.meta.n_context {
        return Err(Error::Validation(format!(
            "context lengths differ: {} vs {}",
            pred.meta.n_context, reference.meta.n_context
        )));
    }
    let per_frame: Vec<f64> = pred
        .predicted_frames()
        .par_iter()
        .zip(reference.predicted_frames())
        .map(|(p, r)| metric.frame_score(p, r, extractor))
        .collect::<Result<_>>()?;
    let aggregate = per_frame.iter().sum::<f64>() / per_frame.len() as f64;
    Ok(FrScore {
        per_frame,
        aggregate,
        polarity: metric.polarity(),
    })
}
