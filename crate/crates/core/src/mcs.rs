//! Motion-compensated cosine similarity (MCS) features.
//!
//! For every location of the last context frame's feature map we search the
//! whole predicted-frame feature map for the channel vector with the highest
//! cosine similarity. Gathering the matched vectors gives a motion-compensated
//! map; the per-channel cosine similarity between the context map and the
//! compensated map is the MCS feature of that predicted frame.

use rayon::prelude::*;

use crate::data::FeatureMap;
use crate::error::{Error, Result};

/// Cosine similarity `pᵀq / (‖p‖‖q‖)`, accumulated in `f64`.
///
/// Returns 0 when either vector has zero norm. The result is clamped to
/// `[-1, 1]`.
pub fn cosine_similarity<T: Copy + Into<f64>>(p: &[T], q: &[T]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::ShapeMismatch(format!(
            "cosine similarity of vectors with lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    if p.is_empty() {
        return Err(Error::ShapeMismatch("cosine similarity of empty vectors".into()));
    }
    let (mut dot, mut pp, mut qq) = (0f64, 0f64, 0f64);
    for (&a, &b) in p.iter().zip(q) {
        let (a, b) = (a.into(), b.into());
        dot += a * b;
        pp += a * a;
        qq += b * b;
    }
    Ok(normalized(dot, pp.sqrt(), qq.sqrt()))
}

#[inline]
fn normalized(dot: f64, norm_p: f64, norm_q: f64) -> f64 {
    if norm_p == 0.0 || norm_q == 0.0 {
        return 0.0;
    }
    (dot / (norm_p * norm_q)).clamp(-1.0, 1.0)
}

#[inline]
fn dot_f32(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).fold(0.0, |acc, v| acc + v)
}

/// Best matches of every context cell in the predicted map.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionField {
    h: usize,
    w: usize,
    matches: Vec<(usize, usize)>,
    similarity: Vec<f64>,
}

impl MotionField {
    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    /// Matched `(row, col)` in the predicted map for context cell `(i, j)`.
    pub fn matched(&self, i: usize, j: usize) -> (usize, usize) {
        self.matches[i * self.w + j]
    }

    pub fn similarity(&self, i: usize, j: usize) -> f64 {
        self.similarity[i * self.w + j]
    }

    /// Matches in row-major context order.
    pub fn matches(&self) -> &[(usize, usize)] {
        &self.matches
    }

    pub fn similarities(&self) -> &[f64] {
        &self.similarity
    }
}

/// Exhaustive best-cosine-match search over the full predicted map.
///
/// Ties go to the smallest row-major index.
pub fn motion_compensate(context: &FeatureMap, predicted: &FeatureMap) -> Result<MotionField> {
    motion_compensate_windowed(context, predicted, None)
}

/// Like [`motion_compensate`], optionally restricted to a square window of
/// the given radius around each context cell.
pub fn motion_compensate_windowed(
    context: &FeatureMap,
    predicted: &FeatureMap,
    radius: Option<usize>,
) -> Result<MotionField> {
    context.ensure_same_shape(predicted)?;
    let (h, w, _) = context.shape();
    let cells = h * w;
    let norms = |m: &FeatureMap| -> Vec<f64> {
        (0..cells).map(|c| dot_f32(m.cell(c), m.cell(c)).sqrt()).collect()
    };
    let ctx_norms = norms(context);
    let pred_norms = norms(predicted);

    let mut matches = Vec::with_capacity(cells);
    let mut similarity = Vec::with_capacity(cells);
    for i in 0..h {
        for j in 0..w {
            let src = i * w + j;
            let (rows, cols) = match radius {
                None => (0..h, 0..w),
                Some(r) => (
                    i.saturating_sub(r)..(i + r + 1).min(h),
                    j.saturating_sub(r)..(j + r + 1).min(w),
                ),
            };
            let cv = context.cell(src);
            let mut best = (f64::NEG_INFINITY, (0, 0));
            for ii in rows {
                for jj in cols.clone() {
                    let dst = ii * w + jj;
                    let s = normalized(dot_f32(cv, predicted.cell(dst)), ctx_norms[src], pred_norms[dst]);
                    // Row-major traversal plus strict comparison keeps the
                    // smallest index among ties.
                    if s > best.0 {
                        best = (s, (ii, jj));
                    }
                }
            }
            matches.push(best.1);
            similarity.push(best.0);
        }
    }
    Ok(MotionField {
        h,
        w,
        matches,
        similarity,
    })
}

/// Per-channel cosine similarity between the context map and the motion
/// compensated predicted map. Length `K`.
pub fn mcs_frame_features(context: &FeatureMap, predicted: &FeatureMap) -> Result<Vec<f32>> {
    let field = motion_compensate(context, predicted)?;
    Ok(mcs_from_field(context, predicted, &field))
}

fn mcs_from_field(context: &FeatureMap, predicted: &FeatureMap, field: &MotionField) -> Vec<f32> {
    let k = context.k();
    let cells = context.h() * context.w();
    let mut dot = vec![0f64; k];
    let mut cc = vec![0f64; k];
    let mut mm = vec![0f64; k];
    for cell in 0..cells {
        let (ii, jj) = field.matches[cell];
        let cv = context.cell(cell);
        let mv = predicted.vector(ii, jj);
        for c in 0..k {
            let (a, b) = (cv[c] as f64, mv[c] as f64);
            dot[c] += a * b;
            cc[c] += a * a;
            mm[c] += b * b;
        }
    }
    (0..k)
        .map(|c| normalized(dot[c], cc[c].sqrt(), mm[c].sqrt()) as f32)
        .collect()
}

/// MCS features of a whole video: `K · N_p` values, predicted-frame major.
#[derive(Debug, Clone, PartialEq)]
pub struct McsFeatureVector(pub Vec<f32>);

/// Uses only the last context frame (`maps[n_context - 1]`) as reference.
pub fn mcs_video_features(maps: &[FeatureMap], n_context: usize) -> Result<McsFeatureVector> {
    if n_context == 0 || maps.len() <= n_context {
        return Err(Error::InsufficientData(format!(
            "MCS needs more than n_context={n_context} frames, got {}",
            maps.len()
        )));
    }
    let reference = &maps[n_context - 1];
    for m in maps {
        reference.ensure_same_shape(m)?;
    }
    let per_frame: Vec<Vec<f32>> = maps[n_context..]
        .par_iter()
        .map(|pred| mcs_frame_features(reference, pred))
        .collect::<Result<_>>()?;
    Ok(McsFeatureVector(per_frame.concat()))
}
