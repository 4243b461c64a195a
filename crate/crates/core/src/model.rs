//! The learned quality model: feature assembly, PCA + linear regression,
//! prediction and the on-disk model format.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{DatasetManifest, ManifestEntry, VideoRecord};
use crate::error::{Error, Result};
use crate::features::{maps_for_video, ssa, BackboneSpec, FeatureExtractor, MapParts, MapSource, VideoMaps};
use crate::mcs::mcs_video_features;
use crate::stats::{linreg_fit, pca_fit, pca_transform, LinearModel, PcaModel};

/// Which per-video features feed the regressor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureSet {
    #[serde(rename = "mcs")]
    Mcs,
    #[serde(rename = "rfd")]
    Rfd,
    /// Spatial averages of every frame's map.
    #[serde(rename = "ssa")]
    Ssa,
    #[serde(rename = "mcs+rfd")]
    McsRfd,
    #[serde(rename = "ssa+rfd")]
    SsaRfd,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 5] = [
        FeatureSet::Mcs,
        FeatureSet::Rfd,
        FeatureSet::Ssa,
        FeatureSet::McsRfd,
        FeatureSet::SsaRfd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureSet::Mcs => "mcs",
            FeatureSet::Rfd => "rfd",
            FeatureSet::Ssa => "ssa",
            FeatureSet::McsRfd => "mcs+rfd",
            FeatureSet::SsaRfd => "ssa+rfd",
        }
    }

    /// Map sequences this set is computed from.
    pub fn parts(self) -> MapParts {
        MapParts {
            frames: !matches!(self, FeatureSet::Rfd),
            rfd: matches!(self, FeatureSet::Rfd | FeatureSet::McsRfd | FeatureSet::SsaRfd),
        }
    }

    /// Vector length for `k` channels, `n_context` context and
    /// `n_predicted` predicted frames.
    pub fn length(self, k: usize, n_context: usize, n_predicted: usize) -> usize {
        let n = n_context + n_predicted;
        k * match self {
            FeatureSet::Mcs => n_predicted,
            FeatureSet::Rfd => n - 1,
            FeatureSet::Ssa => n,
            FeatureSet::McsRfd => n + n_predicted - 1,
            FeatureSet::SsaRfd => 2 * n - 1,
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureSet::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::parse("feature set", format!("unknown feature set {s:?}")))
    }
}

/// Frame counts and feature choice a model was trained with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub n_context: usize,
    pub n_predicted: usize,
    pub feature_set: FeatureSet,
}

impl FeatureConfig {
    pub fn length(&self, k: usize) -> usize {
        self.feature_set.length(k, self.n_context, self.n_predicted)
    }

    fn check(&self, n_context: usize, n_predicted: usize, id: &str) -> Result<()> {
        if (n_context, n_predicted) != (self.n_context, self.n_predicted) {
            return Err(Error::ConfigMismatch(format!(
                "{id} has {n_context} context and {n_predicted} predicted frames; model expects {} and {}",
                self.n_context, self.n_predicted
            )));
        }
        Ok(())
    }
}

/// Builds the feature vector of one video from its maps. MCS blocks come
/// before RFD blocks; within a block, frames are in temporal order.
pub fn assemble_from_maps(maps: &VideoMaps, n_context: usize, feature_set: FeatureSet) -> Result<Vec<f32>> {
    let parts = feature_set.parts();
    if parts.rfd && maps.frames.len() > 1 && maps.rfd.len() + 1 != maps.frames.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} frame maps but {} RFD maps",
            maps.frames.len(),
            maps.rfd.len()
        )));
    }
    let mut out = Vec::new();
    match feature_set {
        FeatureSet::Mcs | FeatureSet::McsRfd => out.extend(mcs_video_features(&maps.frames, n_context)?.0),
        FeatureSet::Ssa | FeatureSet::SsaRfd => {
            if maps.frames.is_empty() {
                return Err(Error::InsufficientData("no frame maps".into()));
            }
            for m in &maps.frames {
                out.extend(ssa(m));
            }
        }
        FeatureSet::Rfd => {}
    }
    if parts.rfd {
        if maps.rfd.is_empty() {
            return Err(Error::InsufficientData("no RFD maps".into()));
        }
        for m in &maps.rfd {
            out.extend(ssa(m));
        }
    }
    Ok(out)
}

/// Features of a decoded video, extracting maps with `extractor`.
pub fn assemble_features(
    video: &VideoRecord,
    extractor: &dyn FeatureExtractor,
    feature_set: FeatureSet,
) -> Result<Vec<f32>> {
    let maps = maps_for_video(video, extractor, feature_set.parts())?;
    assemble_from_maps(&maps, video.meta.n_context, feature_set)
}

/// One feature row per video, with MOS where known.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    ids: Vec<String>,
    rows: Vec<Vec<f32>>,
    mos: Vec<Option<f64>>,
    config: FeatureConfig,
    backbone: BackboneSpec,
}

impl FeatureTable {
    /// Assembles features for `entries`, in parallel across videos.
    /// All videos must share the same frame counts.
    pub fn build(entries: &[&ManifestEntry], source: &dyn MapSource, feature_set: FeatureSet) -> Result<Self> {
        let first = entries
            .first()
            .ok_or_else(|| Error::InsufficientData("no videos to build features for".into()))?;
        let config = FeatureConfig {
            n_context: first.meta.n_context,
            n_predicted: first.meta.n_predicted,
            feature_set,
        };
        for e in entries {
            config.check(e.meta.n_context, e.meta.n_predicted, e.id())?;
        }
        let rows: Vec<Vec<f32>> = entries
            .par_iter()
            .map(|e| {
                let maps = source.video_maps(e, feature_set.parts())?;
                assemble_from_maps(&maps, e.meta.n_context, feature_set)
            })
            .collect::<Result<_>>()?;
        Self::from_rows(
            entries.iter().map(|e| e.id().to_string()).collect(),
            rows,
            entries.iter().map(|e| e.meta.mos).collect(),
            config,
            source.backbone().clone(),
        )
    }

    pub fn from_rows(
        ids: Vec<String>,
        rows: Vec<Vec<f32>>,
        mos: Vec<Option<f64>>,
        config: FeatureConfig,
        backbone: BackboneSpec,
    ) -> Result<Self> {
        if ids.len() != rows.len() || ids.len() != mos.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} ids, {} rows and {} MOS values",
                ids.len(),
                rows.len(),
                mos.len()
            )));
        }
        let expected = config.length(backbone.k);
        if let Some((id, row)) = ids.iter().zip(&rows).find(|(_, r)| r.len() != expected) {
            return Err(Error::ShapeMismatch(format!(
                "{id}: feature length {} but {} expects {expected}",
                row.len(),
                config.feature_set
            )));
        }
        Ok(Self {
            ids,
            rows,
            mos,
            config,
            backbone,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, index: usize) -> &[f32] {
        &self.rows[index]
    }

    pub fn mos(&self) -> &[Option<f64>] {
        &self.mos
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn backbone(&self) -> &BackboneSpec {
        &self.backbone
    }

    pub fn dim(&self) -> usize {
        self.config.length(self.backbone.k)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|i| i == id)
    }

    /// Rows `indices` as an `f64` matrix.
    pub fn matrix(&self, indices: &[usize]) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(indices.len(), d, |i, j| self.rows[indices[i]][j] as f64)
    }

    /// MOS of rows `indices`; errors if any is missing.
    pub fn targets(&self, indices: &[usize]) -> Result<Vec<f64>> {
        indices
            .iter()
            .map(|&i| {
                self.mos[i].ok_or_else(|| Error::Validation(format!("video {} has no MOS", self.ids[i])))
            })
            .collect()
    }
}

/// PCA + linear regression over assembled features.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityModel {
    pub pca: PcaModel,
    pub reg: LinearModel,
    pub backbone: BackboneSpec,
    pub config: FeatureConfig,
}

/// Fits on the table rows `train`. PCA sees only these rows.
pub fn train_on_table(table: &FeatureTable, train: &[usize], k_prime: usize) -> Result<QualityModel> {
    if train.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "training needs at least 2 videos, got {}",
            train.len()
        )));
    }
    let y = table.targets(train)?;
    let x = table.matrix(train);
    let pca = pca_fit(&x, k_prime)?;
    let z = pca_transform(&pca, &x)?;
    let reg = linreg_fit(&z, &y)?;
    Ok(QualityModel {
        pca,
        reg,
        backbone: table.backbone.clone(),
        config: table.config,
    })
}

/// Builds features for `ids` and trains on them.
pub fn train(
    manifest: &DatasetManifest,
    ids: &[String],
    source: &dyn MapSource,
    k_prime: usize,
    feature_set: FeatureSet,
) -> Result<QualityModel> {
    let entries = manifest.select(ids)?;
    if let Some(e) = entries.iter().find(|e| e.meta.mos.is_none()) {
        return Err(Error::Validation(format!("training video {} has no MOS", e.id())));
    }
    let table = FeatureTable::build(&entries, source, feature_set)?;
    let all: Vec<usize> = (0..table.len()).collect();
    train_on_table(&table, &all, k_prime)
}

impl QualityModel {
    fn check_backbone(&self, spec: &BackboneSpec) -> Result<()> {
        if spec != &self.backbone {
            return Err(Error::ConfigMismatch(format!(
                "model was trained on {} features tapped at {} (k={}), provider supplies {} at {} (k={})",
                self.backbone.name, self.backbone.tap_point, self.backbone.k, spec.name, spec.tap_point, spec.k
            )));
        }
        Ok(())
    }

    /// Scores an already assembled feature vector.
    pub fn predict_features(&self, features: &[f32]) -> Result<f64> {
        let x: Vec<f64> = features.iter().map(|&v| v as f64).collect();
        let z = self.pca.transform_row(&x)?;
        Ok(self.reg.predict(&z))
    }

    pub fn predict_video(&self, video: &VideoRecord, extractor: &dyn FeatureExtractor) -> Result<f64> {
        self.check_backbone(extractor.backbone())?;
        self.config.check(video.meta.n_context, video.meta.n_predicted, &video.meta.id)?;
        self.predict_features(&assemble_features(video, extractor, self.config.feature_set)?)
    }

    pub fn predict_entry(&self, entry: &ManifestEntry, source: &dyn MapSource) -> Result<f64> {
        self.check_backbone(source.backbone())?;
        self.config.check(entry.meta.n_context, entry.meta.n_predicted, entry.id())?;
        let maps = source.video_maps(entry, self.config.feature_set.parts())?;
        self.predict_features(&assemble_from_maps(&maps, entry.meta.n_context, self.config.feature_set)?)
    }

    /// Scores every row of a table built with the same backbone and config.
    pub fn predict_table(&self, table: &FeatureTable, rows: &[usize]) -> Result<Vec<f64>> {
        self.check_backbone(&table.backbone)?;
        if table.config != self.config {
            return Err(Error::ConfigMismatch(format!(
                "table uses {:?}, model expects {:?}",
                table.config, self.config
            )));
        }
        let x = table.matrix(rows);
        let z = pca_transform(&self.pca, &x)?;
        Ok(z.row_iter()
            .map(|r| self.reg.predict(&r.iter().copied().collect::<Vec<_>>()))
            .collect())
    }
}

pub const MODEL_MAGIC: &[u8; 4] = b"PVQM";
pub const MODEL_VERSION: u32 = 1;
/// magic, version, payload length, SHA-256 of the payload.
const MODEL_HEADER_LEN: usize = 4 + 4 + 8 + 32;

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    backbone: BackboneSpec,
    config: FeatureConfig,
    dim: usize,
    k_prime: usize,
    requested: usize,
}

fn put_f64s(out: &mut Vec<u8>, values: impl IntoIterator<Item = f64>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(Error::Truncated {
            expected: (self.pos + n) as u64,
            found: self.bytes.len() as u64,
        })?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self
            .take(n * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

/// Serializes a model: a fixed header followed by a payload of a JSON
/// descriptor and little-endian `f64` arrays (mean, column-major basis,
/// explained variance, weights, intercept).
pub fn encode_model(model: &QualityModel) -> Result<Vec<u8>> {
    let header = ModelHeader {
        backbone: model.backbone.clone(),
        config: model.config,
        dim: model.pca.dim(),
        k_prime: model.pca.k_prime(),
        requested: model.pca.requested(),
    };
    if model.reg.weights.len() != header.k_prime {
        return Err(Error::ShapeMismatch(format!(
            "{} regression weights for {} components",
            model.reg.weights.len(),
            header.k_prime
        )));
    }
    let json = serde_json::to_vec(&header).map_err(|e| Error::parse("model header", e))?;
    let mut payload = Vec::new();
    payload.extend_from_slice(&(json.len() as u64).to_le_bytes());
    payload.extend_from_slice(&json);
    put_f64s(&mut payload, model.pca.mean().iter().copied());
    put_f64s(&mut payload, model.pca.basis().iter().copied());
    put_f64s(&mut payload, model.pca.explained_variance().iter().copied());
    put_f64s(&mut payload, model.reg.weights.iter().copied());
    put_f64s(&mut payload, [model.reg.intercept]);

    let mut out = Vec::with_capacity(MODEL_HEADER_LEN + payload.len());
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&Sha256::digest(&payload));
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode_model(bytes: &[u8]) -> Result<QualityModel> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic: [u8; 4] = cur.take(4)?.try_into().expect("4 bytes");
    if &magic != MODEL_MAGIC {
        return Err(Error::BadMagic {
            expected: *MODEL_MAGIC,
            found: magic,
        });
    }
    let version = u32::from_le_bytes(cur.take(4)?.try_into().expect("4 bytes"));
    if version != MODEL_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: MODEL_VERSION,
        });
    }
    let payload_len = cur.u64()? as usize;
    let digest = cur.take(32)?;
    let payload = &bytes[cur.pos..];
    if payload.len() < payload_len {
        return Err(Error::Truncated {
            expected: (MODEL_HEADER_LEN + payload_len) as u64,
            found: bytes.len() as u64,
        });
    }
    if payload.len() > payload_len {
        return Err(Error::Validation(format!(
            "{} trailing bytes after model payload",
            payload.len() - payload_len
        )));
    }
    if Sha256::digest(payload).as_slice() != digest {
        return Err(Error::Checksum);
    }

    let mut cur = Cursor { bytes: payload, pos: 0 };
    let json_len = cur.u64()? as usize;
    let header: ModelHeader =
        serde_json::from_slice(cur.take(json_len)?).map_err(|e| Error::parse("model header", e))?;
    let (d, k) = (header.dim, header.k_prime);
    let mean = cur.f64s(d)?;
    let basis = DMatrix::from_vec(d, k, cur.f64s(d * k)?);
    let variance = cur.f64s(k)?;
    let weights = cur.f64s(k)?;
    let intercept = cur.f64s(1)?[0];
    if cur.pos != payload.len() {
        return Err(Error::Validation("model payload has unexpected trailing data".into()));
    }
    Ok(QualityModel {
        pca: PcaModel::from_parts(mean, basis, variance, header.requested)?,
        reg: LinearModel { weights, intercept },
        backbone: header.backbone,
        config: header.config,
    })
}

pub fn save_model(model: &QualityModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_model(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<QualityModel> {
    let path = path.as_ref();
    decode_model(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, FeatureMap, Frame, VideoMeta};
    use crate::features::SyntheticExtractor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn meta(id: &str, n_context: usize, n_predicted: usize, mos: Option<f64>) -> VideoMeta {
        VideoMeta {
            id: id.into(),
            n_context,
            n_predicted,
            dataset: Dataset::Synthetic,
            predictor: "test".into(),
            distortion_tags: Default::default(),
            is_stochastic_model: false,
            mos,
        }
    }

    fn random_maps(n: usize, k: usize, rng: &mut ChaCha8Rng) -> VideoMaps {
        let mut map = || FeatureMap::from_fn(3, 2, k, |_, _, _| rng.random_range(0.0..1.0)).unwrap();
        VideoMaps {
            frames: (0..n).map(|_| map()).collect(),
            rfd: (0..n - 1).map(|_| map()).collect(),
        }
    }

    #[test]
    fn feature_lengths() {
        assert_eq!(FeatureSet::McsRfd.length(2048, 4, 16), 71680);
        assert_eq!(FeatureSet::Ssa.length(2048, 4, 16), 40960);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let (k, nc, np) = (rng.random_range(1..6), rng.random_range(1..4), rng.random_range(1..5));
            let maps = random_maps(nc + np, k, &mut rng);
            for set in FeatureSet::ALL {
                assert_eq!(assemble_from_maps(&maps, nc, set).unwrap().len(), set.length(k, nc, np), "{set}");
            }
        }
    }

    #[test]
    fn static_video_blocks() {
        let frame = Frame::from_fn(16, 16, |r, c, ch| ((r * 16 + c) * 3 + ch * 50) as u8);
        let video = VideoRecord::new(meta("v", 2, 3, None), vec![frame; 5]).unwrap();
        let ex = SyntheticExtractor::new(4, 6, 2);
        let f = assemble_features(&video, &ex, FeatureSet::McsRfd).unwrap();
        let (mcs, rfd) = f.split_at(6 * 3);
        assert!(mcs.iter().all(|&v| v == 1.0), "{mcs:?}");
        assert!(rfd.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn feature_set_names() {
        for set in FeatureSet::ALL {
            assert_eq!(set.name().parse::<FeatureSet>().unwrap(), set);
            assert_eq!(serde_json::to_string(&set).unwrap(), format!("\"{set}\""));
        }
        assert!("mcs+ssa".parse::<FeatureSet>().is_err());
    }

    fn planted_table(n: usize, d: usize, seed: u64) -> FeatureTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut rows = Vec::new();
        let mut mos = Vec::new();
        for _ in 0..n {
            let row: Vec<f32> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
            let y = 50.0 + row.iter().zip(&w).map(|(x, w)| *x as f64 * w).sum::<f64>();
            rows.push(row);
            mos.push(Some(y));
        }
        let config = FeatureConfig {
            n_context: 1,
            n_predicted: d,
            feature_set: FeatureSet::Mcs,
        };
        FeatureTable::from_rows((0..n).map(|i| format!("v{i}")).collect(), rows, mos, config, BackboneSpec::synthetic(1))
            .unwrap()
    }

    #[test]
    fn interpolates_training_videos() {
        let table = planted_table(20, 40, 1);
        let all: Vec<usize> = (0..20).collect();
        let model = train_on_table(&table, &all, 240).unwrap();
        assert_eq!(model.pca.k_prime(), 19);
        let pred = model.predict_table(&table, &all).unwrap();
        for (p, y) in pred.iter().zip(table.targets(&all).unwrap()) {
            assert!((p - y).abs() < 1e-3);
        }
        assert_eq!(model.predict_features(table.row(3)).unwrap(), pred[3]);
    }

    #[test]
    fn row_order_invariance() {
        let table = planted_table(30, 12, 2);
        let forward: Vec<usize> = (0..25).collect();
        let backward: Vec<usize> = (0..25).rev().collect();
        let a = train_on_table(&table, &forward, 8).unwrap();
        let b = train_on_table(&table, &backward, 8).unwrap();
        let test: Vec<usize> = (25..30).collect();
        let (pa, pb) = (a.predict_table(&table, &test).unwrap(), b.predict_table(&table, &test).unwrap());
        for (x, y) in pa.iter().zip(&pb) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn missing_mos_is_rejected() {
        let mut table = planted_table(5, 3, 3);
        table.mos[2] = None;
        assert!(matches!(train_on_table(&table, &[0, 1, 2], 2), Err(Error::Validation(_))));
        assert!(train_on_table(&table, &[0], 2).is_err());
    }

    #[test]
    fn model_round_trip() {
        let table = planted_table(15, 10, 4);
        let model = train_on_table(&table, &(0..15).collect::<Vec<_>>(), 6).unwrap();
        let bytes = encode_model(&model).unwrap();
        assert_eq!(decode_model(&bytes).unwrap(), model);
        let mut corrupt = bytes.clone();
        let last = corrupt.len() - 3;
        corrupt[last] ^= 0x40;
        assert!(matches!(decode_model(&corrupt), Err(Error::Checksum)));
        let mut old = bytes.clone();
        old[4..8].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(decode_model(&old), Err(Error::UnsupportedVersion { found: 0, .. })));
        assert!(matches!(decode_model(&bytes[..bytes.len() - 1]), Err(Error::Truncated { .. })));
        assert!(matches!(decode_model(b"PVQFxxxx"), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn predict_checks_backbone_and_frames() {
        let ex = SyntheticExtractor::new(1, 3, 2);
        let frames = |n: usize| (0..n).map(|t| Frame::from_fn(8, 8, |r, c, ch| (r * 30 + c * 7 + ch + t * 5) as u8)).collect::<Vec<_>>();
        let videos: Vec<VideoRecord> = (0..4)
            .map(|i| VideoRecord::new(meta(&format!("v{i}"), 1, 2, Some(10.0 * i as f64)), frames(3)).unwrap())
            .collect();
        let rows = videos.iter().map(|v| assemble_features(v, &ex, FeatureSet::McsRfd).unwrap()).collect();
        let config = FeatureConfig { n_context: 1, n_predicted: 2, feature_set: FeatureSet::McsRfd };
        let table = FeatureTable::from_rows(
            videos.iter().map(|v| v.meta.id.clone()).collect(),
            rows,
            videos.iter().map(|v| v.meta.mos).collect(),
            config,
            ex.backbone().clone(),
        )
        .unwrap();
        let model = train_on_table(&table, &[0, 1, 2, 3], 2).unwrap();
        assert_eq!(model.predict_video(&videos[0], &ex).unwrap(), model.predict_video(&videos[0], &ex).unwrap());
        let other = SyntheticExtractor::new(1, 4, 2);
        assert!(matches!(model.predict_video(&videos[0], &other), Err(Error::ConfigMismatch(_))));
        let longer = VideoRecord::new(meta("w", 1, 3, None), frames(4)).unwrap();
        assert!(matches!(model.predict_video(&longer, &ex), Err(Error::ConfigMismatch(_))));
    }
}
