use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BackboneSpec, FeatureExtractor};
use crate::data::{FeatureMap, Frame};
use crate::error::{Error, Result};

const STAGE1_CHANNELS: usize = 8;
const STAGE2_CHANNELS: usize = 16;

/// A seeded three-stage random network: `conv → |·| → avg-pool`, repeated
/// three times (3×3, 3×3, 1×1 kernels). It has no biases, so a black frame
/// maps to all-zero features, and every stage is Lipschitz.
#[derive(Debug, Clone)]
pub struct SyntheticExtractor {
    spec: BackboneSpec,
    seed: u64,
    downscale: usize,
    stages: [Stage; 3],
}

#[derive(Debug, Clone)]
struct Stage {
    in_ch: usize,
    out_ch: usize,
    ksize: usize,
    /// `[ky][kx][in][out]`
    weights: Vec<f32>,
    pool: usize,
}

impl Stage {
    fn random(rng: &mut ChaCha8Rng, in_ch: usize, out_ch: usize, ksize: usize, pool: usize) -> Self {
        let fan_in = (in_ch * ksize * ksize) as f32;
        let bound = (3.0 / fan_in).sqrt();
        let weights = (0..ksize * ksize * in_ch * out_ch)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Self {
            in_ch,
            out_ch,
            ksize,
            weights,
            pool,
        }
    }

    /// Same-size zero-padded convolution followed by `abs` and average pooling.
    fn apply(&self, input: &[f32], h: usize, w: usize) -> (Vec<f32>, usize, usize) {
        let r = (self.ksize / 2) as isize;
        let mut conv = vec![0f32; h * w * self.out_ch];
        for y in 0..h {
            for x in 0..w {
                let out = &mut conv[(y * w + x) * self.out_ch..(y * w + x + 1) * self.out_ch];
                for ky in 0..self.ksize {
                    let sy = y as isize + ky as isize - r;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    for kx in 0..self.ksize {
                        let sx = x as isize + kx as isize - r;
                        if sx < 0 || sx >= w as isize {
                            continue;
                        }
                        let pix = (sy as usize * w + sx as usize) * self.in_ch;
                        let wbase = (ky * self.ksize + kx) * self.in_ch * self.out_ch;
                        for ic in 0..self.in_ch {
                            let v = input[pix + ic];
                            if v == 0.0 {
                                continue;
                            }
                            let wrow = &self.weights[wbase + ic * self.out_ch..wbase + (ic + 1) * self.out_ch];
                            for (o, &wt) in out.iter_mut().zip(wrow) {
                                *o += wt * v;
                            }
                        }
                    }
                }
                for o in out.iter_mut() {
                    *o = o.abs();
                }
            }
        }
        avg_pool(&conv, h, w, self.out_ch, self.pool)
    }
}

fn avg_pool(input: &[f32], h: usize, w: usize, ch: usize, p: usize) -> (Vec<f32>, usize, usize) {
    if p == 1 {
        return (input.to_vec(), h, w);
    }
    let (oh, ow) = (h / p, w / p);
    let mut out = vec![0f32; oh * ow * ch];
    let norm = 1.0 / (p * p) as f32;
    for y in 0..oh {
        for x in 0..ow {
            let dst = &mut out[(y * ow + x) * ch..(y * ow + x + 1) * ch];
            for dy in 0..p {
                for dx in 0..p {
                    let src = ((y * p + dy) * w + x * p + dx) * ch;
                    for (d, &s) in dst.iter_mut().zip(&input[src..src + ch]) {
                        *d += s;
                    }
                }
            }
            for d in dst.iter_mut() {
                *d *= norm;
            }
        }
    }
    (out, oh, ow)
}

/// Splits `downscale` into three pooling factors whose product is
/// `downscale`, spreading prime factors as evenly as possible.
fn pool_factors(downscale: usize) -> [usize; 3] {
    let mut primes = Vec::new();
    let mut n = downscale;
    let mut p = 2;
    while p * p <= n {
        while n % p == 0 {
            primes.push(p);
            n /= p;
        }
        p += 1;
    }
    if n > 1 {
        primes.push(n);
    }
    primes.sort_unstable_by(|a, b| b.cmp(a));
    let mut pools = [1usize; 3];
    for prime in primes {
        let slot = (0..3).min_by_key(|&i| pools[i]).unwrap();
        pools[slot] *= prime;
    }
    pools
}

impl SyntheticExtractor {
    /// # Panics
    ///
    /// If `k` or `downscale` is zero.
    pub fn new(seed: u64, k: usize, downscale: usize) -> Self {
        assert!(k >= 1, "k must be positive");
        assert!(downscale >= 1, "downscale must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pools = pool_factors(downscale);
        let stages = [
            Stage::random(&mut rng, Frame::CHANNELS, STAGE1_CHANNELS, 3, pools[0]),
            Stage::random(&mut rng, STAGE1_CHANNELS, STAGE2_CHANNELS, 3, pools[1]),
            Stage::random(&mut rng, STAGE2_CHANNELS, k, 1, pools[2]),
        ];
        Self {
            spec: BackboneSpec::synthetic(k),
            seed,
            downscale,
            stages,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn downscale(&self) -> usize {
        self.downscale
    }

    /// Text recorded in sidecar metadata.
    pub fn description(&self) -> String {
        format!(
            "synthetic random network seed={} k={} downscale={}; input scaled to [0,1], no resize",
            self.seed, self.spec.k, self.downscale
        )
    }
}

impl FeatureExtractor for SyntheticExtractor {
    fn backbone(&self) -> &BackboneSpec {
        &self.spec
    }

    fn extract(&self, image: &Frame) -> Result<FeatureMap> {
        let (h, w) = (image.height(), image.width());
        if h < self.downscale || w < self.downscale {
            return Err(Error::ShapeMismatch(format!(
                "{h}x{w} image is smaller than the downscale factor {}",
                self.downscale
            )));
        }
        let mut data: Vec<f32> = image.samples().iter().map(|&s| s as f32 / 255.0).collect();
        let (mut ch, mut cw) = (h, w);
        for stage in &self.stages {
            let (next, nh, nw) = stage.apply(&data, ch, cw);
            data = next;
            ch = nh;
            cw = nw;
        }
        FeatureMap::new(ch, cw, self.spec.k, data)
    }
}
