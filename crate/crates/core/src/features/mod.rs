//! Deep feature providers.
//!
//! A [`FeatureExtractor`] turns one image into one [`FeatureMap`]. Real
//! backbones run out of process (an exporter writes PVQF files) or through
//! the optional ONNX runtime; the [`SyntheticExtractor`] is a small seeded
//! random network used for tests and demos.

mod source;
mod synthetic;

#[cfg(feature = "onnx")]
mod onnx;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{FeatureMap, Frame};
use crate::error::{Error, Result};
use crate::pvqf;

pub use source::{maps_for_video, ExtractingSource, FeatureCache, MapParts, MapSource, VideoMaps};
pub use synthetic::SyntheticExtractor;

#[cfg(feature = "onnx")]
pub use onnx::OnnxExtractor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backbone {
    Vgg19,
    Resnet50,
    Inceptionv3,
    Synthetic,
}

impl Backbone {
    pub fn as_str(self) -> &'static str {
        match self {
            Backbone::Vgg19 => "vgg19",
            Backbone::Resnet50 => "resnet50",
            Backbone::Inceptionv3 => "inceptionv3",
            Backbone::Synthetic => "synthetic",
        }
    }
}

impl fmt::Display for Backbone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Backbone {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vgg19" => Ok(Backbone::Vgg19),
            "resnet50" => Ok(Backbone::Resnet50),
            "inceptionv3" => Ok(Backbone::Inceptionv3),
            "synthetic" => Ok(Backbone::Synthetic),
            _ => Err(Error::parse("backbone", format!("unknown backbone {s:?}"))),
        }
    }
}

/// Which network, where it is tapped, and what it produces.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BackboneSpec {
    pub name: Backbone,
    pub tap_point: String,
    /// Channel count at the tap.
    pub k: usize,
    /// Square input side the network expects after resizing; 0 means native
    /// resolution.
    pub input_side: usize,
}

impl BackboneSpec {
    pub const VGG19_LAST_CONV: &'static str = "last_conv_before_fc";
    pub const VGG19_BLOCK5_CONV4: &'static str = "block5_conv4";
    pub const BEFORE_GLOBAL_POOL: &'static str = "before_global_pool";

    /// VGG-19 tapped at its last convolutional layer, as used for learned
    /// features.
    pub fn vgg19() -> Self {
        Self {
            name: Backbone::Vgg19,
            tap_point: Self::VGG19_LAST_CONV.into(),
            k: 512,
            input_side: 224,
        }
    }

    /// VGG-19 at the fourth convolution of block 5, used by the feature-space
    /// full-reference measures.
    pub fn vgg19_block5_conv4() -> Self {
        Self {
            tap_point: Self::VGG19_BLOCK5_CONV4.into(),
            ..Self::vgg19()
        }
    }

    pub fn resnet50() -> Self {
        Self {
            name: Backbone::Resnet50,
            tap_point: Self::BEFORE_GLOBAL_POOL.into(),
            k: 2048,
            input_side: 224,
        }
    }

    pub fn inceptionv3() -> Self {
        Self {
            name: Backbone::Inceptionv3,
            tap_point: Self::BEFORE_GLOBAL_POOL.into(),
            k: 2048,
            input_side: 299,
        }
    }

    pub fn synthetic(k: usize) -> Self {
        Self {
            name: Backbone::Synthetic,
            tap_point: "synthetic".into(),
            k,
            input_side: 0,
        }
    }

    /// The default spec for a backbone name.
    pub fn for_backbone(name: Backbone, synthetic_k: usize) -> Self {
        match name {
            Backbone::Vgg19 => Self::vgg19(),
            Backbone::Resnet50 => Self::resnet50(),
            Backbone::Inceptionv3 => Self::inceptionv3(),
            Backbone::Synthetic => Self::synthetic(synthetic_k),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let expected = match self.name {
            Backbone::Vgg19 => Some(512),
            Backbone::Resnet50 | Backbone::Inceptionv3 => Some(2048),
            Backbone::Synthetic => None,
        };
        match expected {
            Some(k) if self.k != k => Err(Error::Validation(format!(
                "{} produces {k} channels, spec declares {}",
                self.name, self.k
            ))),
            _ if self.k == 0 => Err(Error::Validation("channel count must be positive".into())),
            _ => Ok(()),
        }
    }
}

/// Maps one image to its deep features.
pub trait FeatureExtractor: Send + Sync {
    fn backbone(&self) -> &BackboneSpec;

    fn extract(&self, image: &Frame) -> Result<FeatureMap>;
}

/// Runs `extractor` and checks the result against its declared channel count.
pub fn features_for_image(image: &Frame, extractor: &dyn FeatureExtractor) -> Result<FeatureMap> {
    let map = extractor.extract(image)?;
    check_channels(&map, extractor.backbone())?;
    Ok(map)
}

pub(crate) fn check_channels(map: &FeatureMap, spec: &BackboneSpec) -> Result<()> {
    if map.k() != spec.k {
        return Err(Error::ShapeMismatch(format!(
            "{} declares k={}, features have k={}",
            spec.name,
            spec.k,
            map.k()
        )));
    }
    Ok(())
}

/// Simple spatial averaging: the per-channel mean over all locations.
pub fn ssa(map: &FeatureMap) -> Vec<f32> {
    let k = map.k();
    let mut sums = vec![0f64; k];
    for cell in map.values().chunks_exact(k) {
        for (s, &v) in sums.iter_mut().zip(cell) {
            *s += v as f64;
        }
    }
    let n = (map.h() * map.w()) as f64;
    sums.into_iter().map(|s| (s / n) as f32).collect()
}

/// Feature maps read from a PVQF file, indexed by image position.
#[derive(Debug, Clone)]
pub struct PvqfFeatures {
    spec: BackboneSpec,
    maps: Vec<FeatureMap>,
}

impl PvqfFeatures {
    pub fn open(path: impl AsRef<Path>, spec: BackboneSpec) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(Error::ProviderUnavailable(format!(
                "feature file {} not found",
                path.display()
            )));
        }
        Self::from_maps(pvqf::read_feature_file(path)?, spec)
    }

    pub fn from_maps(maps: Vec<FeatureMap>, spec: BackboneSpec) -> Result<Self> {
        for map in &maps {
            check_channels(map, &spec)?;
        }
        Ok(Self { spec, maps })
    }

    pub fn backbone(&self) -> &BackboneSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    /// Features of the image at `index` (0-based).
    pub fn map(&self, index: usize) -> Result<&FeatureMap> {
        self.maps.get(index).ok_or_else(|| {
            Error::ShapeMismatch(format!(
                "feature file holds {} maps, index {index} requested",
                self.maps.len()
            ))
        })
    }

    pub fn into_maps(self) -> Vec<FeatureMap> {
        self.maps
    }
}

/// Provenance written next to each PVQF file (same basename, `.meta`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SidecarMeta {
    pub backbone: Backbone,
    pub tap_point: String,
    pub k: usize,
    pub preprocessing: String,
    pub exporter_version: String,
    /// Hex SHA-256 of the PVQF file contents.
    #[serde(default)]
    pub sha256: String,
}

impl SidecarMeta {
    pub fn for_spec(spec: &BackboneSpec, preprocessing: impl Into<String>) -> Self {
        Self {
            backbone: spec.name,
            tap_point: spec.tap_point.clone(),
            k: spec.k,
            preprocessing: preprocessing.into(),
            exporter_version: concat!("pvqa-core ", env!("CARGO_PKG_VERSION")).into(),
            sha256: String::new(),
        }
    }

    pub fn path_for(pvqf_path: &Path) -> PathBuf {
        pvqf_path.with_extension("meta")
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::parse("sidecar metadata", e))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::parse("sidecar metadata", e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn matches(&self, spec: &BackboneSpec) -> bool {
        self.backbone == spec.name && self.tap_point == spec.tap_point && self.k == spec.k
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Writes a PVQF file together with its sidecar.
pub fn write_with_sidecar(maps: &[FeatureMap], path: &Path, mut meta: SidecarMeta) -> Result<()> {
    let bytes = pvqf::encode(maps)?;
    meta.sha256 = sha256_hex(&bytes);
    std::fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    meta.write(&SidecarMeta::path_for(path))
}

/// True when `path` exists, its sidecar matches `spec` and the recorded
/// checksum matches the file contents.
pub fn verify_with_sidecar(path: &Path, spec: &BackboneSpec) -> Result<bool> {
    if !path.is_file() {
        return Ok(false);
    }
    let meta_path = SidecarMeta::path_for(path);
    let Ok(meta) = SidecarMeta::read(&meta_path) else {
        return Ok(false);
    };
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(meta.matches(spec) && meta.sha256 == sha256_hex(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ssa_of_constant_map() {
        let m = FeatureMap::new(3, 2, 4, vec![1.25; 24]).unwrap();
        assert_eq!(ssa(&m), vec![1.25; 4]);
    }

    #[test]
    fn ssa_two_cells() {
        let m = FeatureMap::new(2, 1, 1, vec![1.0, 3.0]).unwrap();
        assert_eq!(ssa(&m), vec![2.0]);
    }

    #[test]
    fn ssa_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = FeatureMap::from_fn(7, 7, 2048, |_, _, _| rng.random_range(-2.0..2.0)).unwrap();
        let got = ssa(&m);
        for c in 0..2048 {
            let mut sum = 0f64;
            for i in 0..7 {
                for j in 0..7 {
                    sum += m.get(i, j, c) as f64;
                }
            }
            let want = (sum / 49.0) as f32;
            assert!((got[c] - want).abs() <= 1e-6, "channel {c}");
        }
    }

    #[test]
    fn real_backbones_validate() {
        for spec in [
            BackboneSpec::vgg19(),
            BackboneSpec::vgg19_block5_conv4(),
            BackboneSpec::resnet50(),
            BackboneSpec::inceptionv3(),
            BackboneSpec::synthetic(7),
        ] {
            spec.validate().unwrap();
        }
        let mut bad = BackboneSpec::resnet50();
        bad.k = 512;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn file_backed_indexing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.pvqf");
        let maps: Vec<_> = (0..20)
            .map(|n| FeatureMap::new(2, 2, 512, vec![n as f32; 2048]).unwrap())
            .collect();
        pvqf::write_feature_file(&maps, &path).unwrap();
        let fp = PvqfFeatures::open(&path, BackboneSpec::vgg19()).unwrap();
        assert_eq!(fp.map(3).unwrap(), &maps[3]);
        assert!(fp.map(20).is_err());
    }

    #[test]
    fn file_backed_rejects_channel_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.pvqf");
        let maps = vec![FeatureMap::new(1, 1, 512, vec![0.0; 512]).unwrap()];
        pvqf::write_feature_file(&maps, &path).unwrap();
        let err = PvqfFeatures::open(&path, BackboneSpec::resnet50()).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch(_)));
    }

    #[test]
    fn missing_file_is_provider_unavailable() {
        let err = PvqfFeatures::open("/nonexistent/x.pvqf", BackboneSpec::resnet50()).unwrap_err();
        assert!(matches!(err, Error::ProviderUnavailable(_)));
    }

    #[test]
    fn sidecar_checksum_detects_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.frames.pvqf");
        let spec = BackboneSpec::synthetic(2);
        let maps = vec![FeatureMap::new(1, 1, 2, vec![1.0, 2.0]).unwrap()];
        write_with_sidecar(&maps, &path, SidecarMeta::for_spec(&spec, "none")).unwrap();
        assert!(dir.path().join("v.frames.meta").is_file());
        assert!(verify_with_sidecar(&path, &spec).unwrap());
        assert!(!verify_with_sidecar(&path, &BackboneSpec::synthetic(3)).unwrap());
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[25] ^= 0xff;
        std::fs::write(&path, bytes).unwrap();
        assert!(!verify_with_sidecar(&path, &spec).unwrap());
    }
}
