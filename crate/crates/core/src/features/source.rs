use std::path::{Path, PathBuf};

use super::{check_channels, features_for_image, BackboneSpec, FeatureExtractor};
use crate::data::{FeatureMap, ManifestEntry, VideoRecord};
use crate::error::{Error, Result};
use crate::pvqf;
use crate::rfd::rescaled_frame_difference;

/// Which per-video map sequences a caller needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MapParts {
    pub frames: bool,
    pub rfd: bool,
}

impl MapParts {
    pub const ALL: MapParts = MapParts {
        frames: true,
        rfd: true,
    };
}

/// Feature maps of one video: `N` frame maps and `N − 1` RFD-image maps.
/// A sequence that was not requested is left empty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VideoMaps {
    pub frames: Vec<FeatureMap>,
    pub rfd: Vec<FeatureMap>,
}

/// Supplies per-video feature maps for manifest entries.
pub trait MapSource: Send + Sync {
    fn backbone(&self) -> &BackboneSpec;

    fn video_maps(&self, entry: &ManifestEntry, parts: MapParts) -> Result<VideoMaps>;
}

/// Runs an extractor over every frame and every rescaled frame difference.
pub fn maps_for_video(
    video: &VideoRecord,
    extractor: &dyn FeatureExtractor,
    parts: MapParts,
) -> Result<VideoMaps> {
    let frames = if parts.frames {
        video
            .frames
            .iter()
            .map(|f| features_for_image(f, extractor))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let rfd = if parts.rfd {
        video
            .frames
            .windows(2)
            .map(|pair| features_for_image(&rescaled_frame_difference(&pair[0], &pair[1])?, extractor))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    Ok(VideoMaps { frames, rfd })
}

/// Decodes frames from disk and extracts features on the fly.
pub struct ExtractingSource<E> {
    extractor: E,
}

impl<E: FeatureExtractor> ExtractingSource<E> {
    pub fn new(extractor: E) -> Self {
        Self { extractor }
    }

    pub fn extractor(&self) -> &E {
        &self.extractor
    }
}

impl<E: FeatureExtractor> MapSource for ExtractingSource<E> {
    fn backbone(&self) -> &BackboneSpec {
        self.extractor.backbone()
    }

    fn video_maps(&self, entry: &ManifestEntry, parts: MapParts) -> Result<VideoMaps> {
        let video = entry.load()?;
        maps_for_video(&video, &self.extractor, parts)
    }
}

/// A directory of cached PVQF files, two per video:
/// `<id>.frames.pvqf` (N maps) and `<id>.rfd.pvqf` (N − 1 maps).
#[derive(Debug, Clone)]
pub struct FeatureCache {
    dir: PathBuf,
    spec: BackboneSpec,
}

impl FeatureCache {
    pub fn new(dir: impl Into<PathBuf>, spec: BackboneSpec) -> Self {
        Self {
            dir: dir.into(),
            spec,
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn frames_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.frames.pvqf"))
    }

    pub fn rfd_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.rfd.pvqf"))
    }

    fn read(&self, path: &Path, expected: usize) -> Result<Vec<FeatureMap>> {
        if !path.is_file() {
            return Err(Error::ProviderUnavailable(format!(
                "cached features {} not found",
                path.display()
            )));
        }
        let maps = pvqf::read_feature_file(path)?;
        if maps.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{} holds {} maps, expected {expected}",
                path.display(),
                maps.len()
            )));
        }
        for map in &maps {
            check_channels(map, &self.spec)?;
        }
        Ok(maps)
    }
}

impl MapSource for FeatureCache {
    fn backbone(&self) -> &BackboneSpec {
        &self.spec
    }

    fn video_maps(&self, entry: &ManifestEntry, parts: MapParts) -> Result<VideoMaps> {
        let n = entry.meta.n_frames();
        let frames = if parts.frames {
            self.read(&self.frames_path(entry.id()), n)?
        } else {
            Vec::new()
        };
        let rfd = if parts.rfd {
            self.read(&self.rfd_path(entry.id()), n - 1)?
        } else {
            Vec::new()
        };
        Ok(VideoMaps { frames, rfd })
    }
}
