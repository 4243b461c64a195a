//! Rescaled frame differences (RFD) and their spatially averaged features.

use rayon::prelude::*;

use crate::data::Frame;
use crate::error::{Error, Result};
use crate::features::{features_for_image, ssa, FeatureExtractor};
use crate::mcs::cosine_similarity;

/// Signed difference `b − a`, affinely stretched to `[0, 255]` per color
/// channel and rounded half away from zero. A channel whose difference is
/// constant becomes all zeros.
pub fn rescaled_frame_difference(a: &Frame, b: &Frame) -> Result<Frame> {
    if !a.same_dims(b) {
        return Err(Error::ShapeMismatch(format!(
            "frame difference of {}x{} and {}x{} frames",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    let diffs: Vec<i16> = a
        .samples()
        .iter()
        .zip(b.samples())
        .map(|(&x, &y)| y as i16 - x as i16)
        .collect();
    let mut lo = [i16::MAX; Frame::CHANNELS];
    let mut hi = [i16::MIN; Frame::CHANNELS];
    for px in diffs.chunks_exact(Frame::CHANNELS) {
        for ch in 0..Frame::CHANNELS {
            lo[ch] = lo[ch].min(px[ch]);
            hi[ch] = hi[ch].max(px[ch]);
        }
    }
    let samples = diffs
        .iter()
        .enumerate()
        .map(|(idx, &d)| {
            let ch = idx % Frame::CHANNELS;
            if hi[ch] == lo[ch] {
                0
            } else {
                let scaled = (d - lo[ch]) as f64 * 255.0 / (hi[ch] - lo[ch]) as f64;
                scaled.round() as u8
            }
        })
        .collect();
    Frame::new(a.height(), a.width(), samples)
}

/// RFD features of a whole video: `K · (N − 1)` values, difference major.
#[derive(Debug, Clone, PartialEq)]
pub struct RfdFeatureVector(pub Vec<f32>);

/// Features every adjacent pair (context frames included), averages each
/// map spatially and concatenates.
pub fn rfd_video_features(frames: &[Frame], extractor: &dyn FeatureExtractor) -> Result<RfdFeatureVector> {
    if frames.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "RFD features need at least 2 frames, got {}",
            frames.len()
        )));
    }
    let per_pair: Vec<Vec<f32>> = frames
        .par_windows(2)
        .map(|pair| {
            let rfd = rescaled_frame_difference(&pair[0], &pair[1])?;
            Ok(ssa(&features_for_image(&rfd, extractor)?))
        })
        .collect::<Result<_>>()?;
    Ok(RfdFeatureVector(per_pair.concat()))
}

/// `1 − cosine_similarity(x, y)`.
pub fn rfd_dissimilarity(x: &[f32], y: &[f32]) -> Result<f64> {
    Ok(1.0 - cosine_similarity(x, y)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::SyntheticExtractor;

    #[test]
    fn equal_frames_give_black_image() {
        let a = Frame::from_fn(4, 4, |r, c, ch| (r * 40 + c * 3 + ch) as u8);
        let rfd = rescaled_frame_difference(&a, &a).unwrap();
        assert!(rfd.samples().iter().all(|&s| s == 0));
    }

    #[test]
    fn symmetric_range_maps_zero_to_128() {
        // Red channel differences -5, 0, +5.
        let a = Frame::new(1, 3, vec![10, 0, 0, 10, 0, 0, 10, 0, 0]).unwrap();
        let b = Frame::new(1, 3, vec![5, 0, 0, 10, 0, 0, 15, 0, 0]).unwrap();
        let rfd = rescaled_frame_difference(&a, &b).unwrap();
        assert_eq!(rfd.get(0, 0, 0), 0);
        assert_eq!(rfd.get(0, 1, 0), 128);
        assert_eq!(rfd.get(0, 2, 0), 255);
        // Constant-difference channels.
        assert_eq!(rfd.get(0, 1, 1), 0);
    }

    #[test]
    fn dimension_mismatch() {
        let a = Frame::filled(2, 2, [0, 0, 0]);
        let b = Frame::filled(2, 3, [0, 0, 0]);
        assert!(rescaled_frame_difference(&a, &b).is_err());
    }

    #[test]
    fn video_feature_length() {
        let ex = SyntheticExtractor::new(7, 6, 2);
        let frames: Vec<_> = (0..5).map(|t| Frame::from_fn(8, 8, |r, c, ch| (r * 9 + c * t + ch * 40) as u8)).collect();
        assert_eq!(rfd_video_features(&frames, &ex).unwrap().0.len(), 6 * 4);
        assert!(rfd_video_features(&frames[..1], &ex).is_err());
    }

    #[test]
    fn static_video_gives_zero_features() {
        let ex = SyntheticExtractor::new(7, 6, 2);
        let frames = vec![Frame::from_fn(8, 8, |r, c, _| (r * 20 + c) as u8); 4];
        assert!(rfd_video_features(&frames, &ex).unwrap().0.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dissimilarity() {
        assert!(rfd_dissimilarity(&[1.0, 2.0], &[1.0, 2.0]).unwrap().abs() < 1e-12);
        assert_eq!(rfd_dissimilarity(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), 1.0);
        assert!(rfd_dissimilarity(&[1.0], &[0.0, 3.0]).is_err());
    }
}
