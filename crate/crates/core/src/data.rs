//! Domain types shared by every stage of the pipeline: frames, deep feature
//! maps, video records and the dataset manifest.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An 8-bit RGB image stored row-major with interleaved channels.
#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    height: usize,
    width: usize,
    samples: Vec<u8>,
}

impl fmt::Debug for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Frame")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish_non_exhaustive()
    }
}

impl Frame {
    pub const CHANNELS: usize = 3;

    pub fn new(height: usize, width: usize, samples: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Validation(format!(
                "frame dimensions must be positive, got {height}x{width}"
            )));
        }
        if samples.len() != height * width * Self::CHANNELS {
            return Err(Error::ShapeMismatch(format!(
                "{height}x{width}x3 frame needs {} samples, got {}",
                height * width * Self::CHANNELS,
                samples.len()
            )));
        }
        Ok(Self {
            height,
            width,
            samples,
        })
    }

    /// Builds a frame by evaluating `f(row, col, channel)` for every sample.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> u8) -> Self {
        assert!(height > 0 && width > 0, "frame dimensions must be positive");
        let mut samples = Vec::with_capacity(height * width * Self::CHANNELS);
        for row in 0..height {
            for col in 0..width {
                for ch in 0..Self::CHANNELS {
                    samples.push(f(row, col, ch));
                }
            }
        }
        Self {
            height,
            width,
            samples,
        }
    }

    pub fn filled(height: usize, width: usize, rgb: [u8; 3]) -> Self {
        Self::from_fn(height, width, |_, _, ch| rgb[ch])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> u8 {
        self.samples[(row * self.width + col) * Self::CHANNELS + ch]
    }

    pub fn same_dims(&self, other: &Frame) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Decodes an image file and converts it to 8-bit RGB.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let rgb = img.to_rgb8();
        let (w, h) = rgb.dimensions();
        Self::new(h as usize, w as usize, rgb.into_raw())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let buf = image::RgbImage::from_raw(
            self.width as u32,
            self.height as u32,
            self.samples.clone(),
        )
        .expect("frame buffer size is validated at construction");
        buf.save(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Activations of one image at a backbone tap: an `h × w × k` tensor stored
/// as `[row][col][channel]`.
#[derive(Clone, PartialEq, Debug)]
pub struct FeatureMap {
    h: usize,
    w: usize,
    k: usize,
    values: Vec<f32>,
}

impl FeatureMap {
    pub fn new(h: usize, w: usize, k: usize, values: Vec<f32>) -> Result<Self> {
        if h == 0 || w == 0 || k == 0 {
            return Err(Error::ShapeMismatch(format!(
                "feature map dimensions must be positive, got {h}x{w}x{k}"
            )));
        }
        if values.len() != h * w * k {
            return Err(Error::ShapeMismatch(format!(
                "{h}x{w}x{k} feature map needs {} values, got {}",
                h * w * k,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite feature value at flat index {pos}"
            )));
        }
        Ok(Self { h, w, k, values })
    }

    pub fn from_fn(h: usize, w: usize, k: usize, mut f: impl FnMut(usize, usize, usize) -> f32) -> Result<Self> {
        let mut values = Vec::with_capacity(h * w * k);
        for i in 0..h {
            for j in 0..w {
                for c in 0..k {
                    values.push(f(i, j, c));
                }
            }
        }
        Self::new(h, w, k, values)
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.h, self.w, self.k)
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, c: usize) -> f32 {
        self.values[(i * self.w + j) * self.k + c]
    }

    /// The channel vector `f(i, j, ·)`.
    #[inline]
    pub fn vector(&self, i: usize, j: usize) -> &[f32] {
        let start = (i * self.w + j) * self.k;
        &self.values[start..start + self.k]
    }

    /// Channel vector at row-major cell index `cell = i * w + j`.
    #[inline]
    pub fn cell(&self, cell: usize) -> &[f32] {
        &self.values[cell * self.k..(cell + 1) * self.k]
    }

    pub(crate) fn ensure_same_shape(&self, other: &FeatureMap) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch(format!(
                "feature maps differ: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }
}

/// Source dataset of a video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dataset {
    #[serde(rename = "BAIR")]
    Bair,
    #[serde(rename = "BDD100K")]
    Bdd100k,
    Caltech,
    #[serde(rename = "KITTI")]
    Kitti,
    #[serde(rename = "KTH")]
    Kth,
    #[serde(rename = "MSR")]
    Msr,
    #[serde(rename = "PENN")]
    Penn,
    #[serde(rename = "PUSH")]
    Push,
    #[serde(rename = "UCF101")]
    Ucf101,
    /// Generated test videos.
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistortionTag {
    Blur,
    Shape,
    Disappearance,
    Color,
    Natural,
}

/// Everything known about a video except its pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub id: String,
    pub n_context: usize,
    pub n_predicted: usize,
    pub dataset: Dataset,
    pub predictor: String,
    #[serde(default)]
    pub distortion_tags: BTreeSet<DistortionTag>,
    #[serde(default)]
    pub is_stochastic_model: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mos: Option<f64>,
}

impl VideoMeta {
    pub fn n_frames(&self) -> usize {
        self.n_context + self.n_predicted
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::Validation("video id must not be empty".into()));
        }
        if self.n_context < 1 || self.n_predicted < 1 {
            return Err(Error::Validation(format!(
                "{}: need at least one context and one predicted frame (n_context={}, n_predicted={})",
                self.id, self.n_context, self.n_predicted
            )));
        }
        if let Some(mos) = self.mos {
            if !(0.0..=100.0).contains(&mos) {
                return Err(Error::Validation(format!(
                    "{}: MOS {mos} outside [0, 100]",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// A video with decoded frames.
#[derive(Debug, Clone)]
pub struct VideoRecord {
    pub meta: VideoMeta,
    pub frames: Vec<Frame>,
}

impl VideoRecord {
    pub fn new(meta: VideoMeta, frames: Vec<Frame>) -> Result<Self> {
        meta.validate()?;
        check_frames(&meta.id, meta.n_frames(), &frames)?;
        Ok(Self { meta, frames })
    }

    pub fn context_frames(&self) -> &[Frame] {
        &self.frames[..self.meta.n_context]
    }

    pub fn predicted_frames(&self) -> &[Frame] {
        &self.frames[self.meta.n_context..]
    }
}

fn check_frames(id: &str, expected: usize, frames: &[Frame]) -> Result<()> {
    if frames.len() != expected {
        return Err(Error::Validation(format!(
            "{id}: expected {expected} frames (n_context + n_predicted), found {}",
            frames.len()
        )));
    }
    if let Some(first) = frames.first() {
        if let Some(bad) = frames.iter().position(|f| !f.same_dims(first)) {
            return Err(Error::Validation(format!(
                "{id}: frame {bad} is {}x{}, frame 0 is {}x{}",
                frames[bad].height(),
                frames[bad].width(),
                first.height(),
                first.width()
            )));
        }
    }
    Ok(())
}

/// One manifest entry: metadata plus frame files in temporal order.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub meta: VideoMeta,
    pub frames: Vec<PathBuf>,
    /// Ground-truth frames, needed only by full-reference measures.
    pub reference_frames: Option<Vec<PathBuf>>,
}

impl ManifestEntry {
    pub fn id(&self) -> &str {
        &self.meta.id
    }

    pub fn load(&self) -> Result<VideoRecord> {
        let frames = self
            .frames
            .iter()
            .map(Frame::load)
            .collect::<Result<Vec<_>>>()?;
        VideoRecord::new(self.meta.clone(), frames)
    }

    /// Loads the ground-truth video, if the entry has one.
    pub fn load_reference(&self) -> Result<VideoRecord> {
        let paths = self.reference_frames.as_ref().ok_or_else(|| {
            Error::Validation(format!("{}: no reference frames in manifest", self.meta.id))
        })?;
        let frames = paths.iter().map(Frame::load).collect::<Result<Vec<_>>>()?;
        VideoRecord::new(self.meta.clone(), frames)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub entries: Vec<ManifestEntry>,
}

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ManifestFile {
    schema_version: u32,
    #[serde(default)]
    entries: Vec<EntryFile>,
}

#[derive(Serialize, Deserialize)]
struct EntryFile {
    #[serde(flatten)]
    meta: VideoMeta,
    frames: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reference_frames: Option<Vec<PathBuf>>,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        let manifest = Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            entries,
        };
        manifest.validate(false)?;
        Ok(manifest)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.meta.id.clone()).collect()
    }

    pub fn get(&self, id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.meta.id == id)
    }

    /// Looks up several ids, preserving their order.
    pub fn select(&self, ids: &[String]) -> Result<Vec<&ManifestEntry>> {
        ids.iter()
            .map(|id| {
                self.get(id)
                    .ok_or_else(|| Error::Validation(format!("unknown video id {id:?}")))
            })
            .collect()
    }

    fn validate(&self, check_files: bool) -> Result<()> {
        let mut seen = HashSet::new();
        for entry in &self.entries {
            entry.meta.validate()?;
            if !seen.insert(entry.meta.id.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate video id {:?}",
                    entry.meta.id
                )));
            }
            let n = entry.meta.n_frames();
            if entry.frames.len() != n {
                return Err(Error::Validation(format!(
                    "{}: n_context + n_predicted = {n} but {} frame files listed",
                    entry.meta.id,
                    entry.frames.len()
                )));
            }
            if let Some(refs) = &entry.reference_frames {
                if refs.len() != n {
                    return Err(Error::Validation(format!(
                        "{}: {} reference frames listed, expected {n}",
                        entry.meta.id,
                        refs.len()
                    )));
                }
            }
            if check_files {
                let all = entry
                    .frames
                    .iter()
                    .chain(entry.reference_frames.iter().flatten());
                for path in all {
                    if !path.is_file() {
                        return Err(Error::Validation(format!(
                            "{}: missing frame file {}",
                            entry.meta.id,
                            path.display()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Parses manifest text. Relative frame paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let file: ManifestFile = toml::from_str(text).map_err(|e| Error::parse("manifest", e))?;
        if file.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::UnsupportedVersion {
                found: file.schema_version,
                supported: MANIFEST_SCHEMA_VERSION,
            });
        }
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        let entries = file
            .entries
            .into_iter()
            .map(|e| ManifestEntry {
                meta: e.meta,
                frames: e.frames.into_iter().map(resolve).collect(),
                reference_frames: e
                    .reference_frames
                    .map(|r| r.into_iter().map(resolve).collect()),
            })
            .collect();
        Ok(Self {
            schema_version: file.schema_version,
            entries,
        })
    }

    /// Serializes the manifest. Paths under `base` are written relative to it.
    pub fn to_toml(&self, base: &Path) -> Result<String> {
        let rel = |p: &PathBuf| p.strip_prefix(base).map(Path::to_path_buf).unwrap_or_else(|_| p.clone());
        let file = ManifestFile {
            schema_version: self.schema_version,
            entries: self
                .entries
                .iter()
                .map(|e| EntryFile {
                    meta: e.meta.clone(),
                    frames: e.frames.iter().map(rel).collect(),
                    reference_frames: e.reference_frames.as_ref().map(|r| r.iter().map(rel).collect()),
                })
                .collect(),
        };
        toml::to_string(&file).map_err(|e| Error::parse("manifest", e))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new("."));
        let text = self.to_toml(base)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Reads and validates a manifest file, checking that every frame file exists.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let manifest = DatasetManifest::parse(&text, base)?;
    manifest.validate(true)?;
    Ok(manifest)
}

impl FromStr for Dataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::parse("dataset", format!("unknown dataset {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(id: &str) -> VideoMeta {
        VideoMeta {
            id: id.into(),
            n_context: 4,
            n_predicted: 16,
            dataset: Dataset::Kth,
            predictor: "mcnet".into(),
            distortion_tags: [DistortionTag::Blur].into_iter().collect(),
            is_stochastic_model: false,
            mos: Some(50.0),
        }
    }

    #[test]
    fn frame_rejects_wrong_sample_count() {
        assert!(Frame::new(2, 2, vec![0; 11]).is_err());
        assert!(Frame::new(0, 2, vec![]).is_err());
        assert!(Frame::new(2, 2, vec![0; 12]).is_ok());
    }

    #[test]
    fn feature_map_rejects_non_finite() {
        assert!(FeatureMap::new(1, 1, 2, vec![0.0, f32::NAN]).is_err());
        assert!(FeatureMap::new(1, 1, 2, vec![0.0]).is_err());
    }

    #[test]
    fn feature_map_layout_is_row_col_channel() {
        let m = FeatureMap::from_fn(2, 3, 4, |i, j, c| (i * 100 + j * 10 + c) as f32).unwrap();
        assert_eq!(m.get(1, 2, 3), 123.0);
        assert_eq!(m.vector(1, 2), &[120.0, 121.0, 122.0, 123.0]);
        assert_eq!(m.cell(5), m.vector(1, 2));
    }

    #[test]
    fn video_record_checks_frame_count() {
        let frames = vec![Frame::filled(4, 4, [0, 0, 0]); 19];
        assert!(matches!(
            VideoRecord::new(meta("a"), frames),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn video_record_checks_frame_dims() {
        let mut frames = vec![Frame::filled(4, 4, [0, 0, 0]); 20];
        frames[7] = Frame::filled(4, 5, [0, 0, 0]);
        assert!(VideoRecord::new(meta("a"), frames).is_err());
    }

    #[test]
    fn empty_manifest_parses() {
        let m = DatasetManifest::parse("schema_version = 1\n", Path::new(".")).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn unknown_schema_version_rejected() {
        let err = DatasetManifest::parse("schema_version = 9\n", Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::UnsupportedVersion { found: 9, .. }));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let entry = ManifestEntry {
            meta: meta("dup"),
            frames: vec![PathBuf::from("x.png"); 20],
            reference_frames: None,
        };
        let err = DatasetManifest::new(vec![entry.clone(), entry]).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn mos_out_of_range_rejected() {
        let mut m = meta("a");
        m.mos = Some(101.0);
        assert!(m.validate().is_err());
    }

    #[test]
    fn dataset_names_parse() {
        assert_eq!("BDD100K".parse::<Dataset>().unwrap(), Dataset::Bdd100k);
        assert_eq!("Caltech".parse::<Dataset>().unwrap(), Dataset::Caltech);
        assert!("kth".parse::<Dataset>().is_err());
    }
}
