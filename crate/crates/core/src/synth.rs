//! Seeded synthetic "predicted videos" with a planted quality score.
//!
//! Each video is a moving random texture. Context frames are sharp; the
//! predicted frames are Gaussian-blurred with a strength `b ∈ [0, 1]` that
//! grows over the prediction horizon. The planted MOS is
//! `100 − 60·b + N(0, σ²)`, clamped to `[0, 100]`.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::data::{Dataset, DatasetManifest, DistortionTag, Frame, ManifestEntry, VideoMeta, VideoRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_videos: usize,
    pub n_context: usize,
    pub n_predicted: usize,
    pub height: usize,
    pub width: usize,
    pub seed: u64,
    /// Standard deviation of the MOS noise.
    pub mos_noise: f64,
    /// Blur σ in pixels reached at the last predicted frame when `b = 1`.
    pub max_blur: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_videos: 300,
            n_context: 4,
            n_predicted: 16,
            height: 32,
            width: 32,
            seed: 0,
            mos_noise: 3.0,
            max_blur: 3.0,
        }
    }
}

/// A generated video, its sharp ground truth and the planted blur strength.
#[derive(Debug, Clone)]
pub struct SynthVideo {
    pub record: VideoRecord,
    pub reference: Vec<Frame>,
    pub blur: f64,
}

/// Wave periods in pixels; every texture shares this spectrum so blur has
/// a comparable effect on all videos.
const PERIODS: [f64; 4] = [3.0, 5.0, 8.0, 13.0];

/// Sum of randomly oriented and phased sinusoids per color channel.
struct Texture {
    /// (kx, ky, phase, amplitude) per wave, per channel.
    waves: [Vec<(f64, f64, f64, f64)>; 3],
}

impl Texture {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut channel = || {
            PERIODS
                .iter()
                .map(|&period| {
                    let angle = rng.random_range(0.0..TAU);
                    let k = TAU / period;
                    (k * angle.cos(), k * angle.sin(), rng.random_range(0.0..TAU), 25.0)
                })
                .collect()
        };
        Self {
            waves: [channel(), channel(), channel()],
        }
    }

    fn render(&self, h: usize, w: usize, dx: f64, dy: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(h * w * 3);
        for r in 0..h {
            for c in 0..w {
                let (x, y) = (c as f64 - dx, r as f64 - dy);
                for waves in &self.waves {
                    let v: f64 = waves.iter().map(|(kx, ky, ph, a)| a * (kx * x + ky * y + ph).sin()).sum();
                    out.push(128.0 + v);
                }
            }
        }
        out
    }
}

fn gaussian_blur(img: &[f64], h: usize, w: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return img.to_vec();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius).map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.iter().map(|k| k / total).collect();
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0f64; img.len()];
    for r in 0..h {
        for c in 0..w {
            for ch in 0..3 {
                tmp[(r * w + c) * 3 + ch] = kernel
                    .iter()
                    .enumerate()
                    .map(|(i, k)| k * img[(r * w + clamp(c as isize + i as isize - radius, w)) * 3 + ch])
                    .sum();
            }
        }
    }
    let mut out = vec![0f64; img.len()];
    for r in 0..h {
        for c in 0..w {
            for ch in 0..3 {
                out[(r * w + c) * 3 + ch] = kernel
                    .iter()
                    .enumerate()
                    .map(|(i, k)| k * tmp[(clamp(r as isize + i as isize - radius, h) * w + c) * 3 + ch])
                    .sum();
            }
        }
    }
    out
}

fn quantize(img: &[f64], h: usize, w: usize) -> Frame {
    Frame::new(h, w, img.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect()).expect("dimensions match")
}

pub fn video_id(index: usize) -> String {
    format!("synth{index:04}")
}

/// Generates video `index`; the result depends only on `(config, index)`.
pub fn generate_video(config: &SynthConfig, index: usize) -> SynthVideo {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    let texture = Texture::random(&mut rng);
    let speed = rng.random_range(0.3..1.5);
    let heading = rng.random_range(0.0..TAU);
    let (vx, vy) = (speed * heading.cos(), speed * heading.sin());
    let blur = rng.random_range(0.0..1.0);
    let noise = Normal::new(0.0, config.mos_noise.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let mos = if config.mos_noise > 0.0 {
        100.0 - 60.0 * blur + noise.sample(&mut rng)
    } else {
        100.0 - 60.0 * blur
    };

    let (h, w) = (config.height, config.width);
    let n = config.n_context + config.n_predicted;
    let mut frames = Vec::with_capacity(n);
    let mut reference = Vec::with_capacity(n);
    for t in 0..n {
        let sharp = texture.render(h, w, vx * t as f64, vy * t as f64);
        reference.push(quantize(&sharp, h, w));
        if t < config.n_context {
            frames.push(quantize(&sharp, h, w));
        } else {
            let step = (t + 1 - config.n_context) as f64 / config.n_predicted as f64;
            frames.push(quantize(&gaussian_blur(&sharp, h, w, blur * config.max_blur * step), h, w));
        }
    }
    let meta = VideoMeta {
        id: video_id(index),
        n_context: config.n_context,
        n_predicted: config.n_predicted,
        dataset: Dataset::Synthetic,
        predictor: "gaussian-blur".into(),
        distortion_tags: [DistortionTag::Blur].into_iter().collect(),
        is_stochastic_model: false,
        mos: Some(mos.clamp(0.0, 100.0)),
    };
    SynthVideo {
        record: VideoRecord::new(meta, frames).expect("frames match metadata"),
        reference,
        blur,
    }
}

pub fn generate_dataset(config: &SynthConfig) -> Vec<SynthVideo> {
    (0..config.n_videos).into_par_iter().map(|i| generate_video(config, i)).collect()
}

fn write_frames(dir: &Path, frames: &[Frame]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    frames
        .iter()
        .enumerate()
        .map(|(t, f)| {
            let path = dir.join(format!("{t:03}.png"));
            f.save(&path)?;
            Ok(path)
        })
        .collect()
}

/// Writes PNG frames under `dir/frames/<id>/` and `dir/reference/<id>/`
/// and a manifest at `dir/manifest.toml`, which is returned.
pub fn write_dataset(config: &SynthConfig, dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    let entries = (0..config.n_videos)
        .into_par_iter()
        .map(|i| {
            let video = generate_video(config, i);
            let id = video.record.meta.id.clone();
            Ok(ManifestEntry {
                frames: write_frames(&dir.join("frames").join(&id), &video.record.frames)?,
                reference_frames: Some(write_frames(&dir.join("reference").join(&id), &video.reference)?),
                meta: video.record.meta,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest::new(entries)?;
    manifest.write(dir.join("manifest.toml"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            n_videos: 6,
            n_context: 2,
            n_predicted: 3,
            height: 16,
            width: 16,
            seed: 9,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic_per_index() {
        let c = small();
        let a = generate_video(&c, 3);
        let b = generate_video(&c, 3);
        assert_eq!(a.record.frames, b.record.frames);
        assert_eq!(a.record.meta, b.record.meta);
        assert_ne!(generate_video(&c, 4).record.frames, a.record.frames);
    }

    #[test]
    fn context_frames_are_sharp() {
        let v = generate_video(&small(), 1);
        assert_eq!(v.record.context_frames(), &v.reference[..2]);
        assert_eq!(v.record.frames.len(), 5);
    }

    #[test]
    fn planted_mos() {
        let c = SynthConfig { mos_noise: 0.0, ..small() };
        for i in 0..c.n_videos {
            let v = generate_video(&c, i);
            assert!((v.record.meta.mos.unwrap() - (100.0 - 60.0 * v.blur)).abs() < 1e-12);
        }
    }

    #[test]
    fn blur_preserves_constant_images() {
        let img = vec![77.0; 5 * 4 * 3];
        assert!(gaussian_blur(&img, 5, 4, 1.3).iter().all(|v| (v - 77.0).abs() < 1e-9));
    }

    #[test]
    fn writes_a_loadable_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let c = small();
        let written = write_dataset(&c, dir.path()).unwrap();
        let loaded = crate::data::load_manifest(dir.path().join("manifest.toml")).unwrap();
        assert_eq!(written, loaded);
        let video = loaded.entries[2].load().unwrap();
        assert_eq!(video.frames, generate_video(&c, 2).record.frames);
        assert_eq!(loaded.entries[2].load_reference().unwrap().frames, generate_video(&c, 2).reference);
    }
}
