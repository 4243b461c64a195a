use std::path::PathBuf;

use clap::Args;
use pvqa_core::features::features_for_image;
use pvqa_core::{
    Backbone, BackboneSpec, Error, ExtractingSource, FeatureCache, FeatureExtractor, FeatureMap, Frame, MapSource,
    SyntheticExtractor,
};

#[derive(Debug, Clone, Args)]
pub struct BackboneArgs {
    /// Backbone network: vgg19, resnet50, inceptionv3 or synthetic.
    #[arg(long, env = "PVQA_BACKBONE", default_value = "synthetic")]
    pub backbone: Backbone,

    /// Exported ONNX graph for a real backbone.
    #[arg(long, env = "PVQA_ONNX_MODEL")]
    pub onnx_model: Option<PathBuf>,

    /// Channel count of the synthetic backbone.
    #[arg(long, env = "PVQA_SYNTHETIC_K", default_value_t = 128)]
    pub synthetic_k: usize,

    /// Spatial downscale factor of the synthetic backbone.
    #[arg(long, env = "PVQA_SYNTHETIC_DOWNSCALE", default_value_t = 4)]
    pub synthetic_downscale: usize,

    /// Weight seed of the synthetic backbone.
    #[arg(long, env = "PVQA_SYNTHETIC_SEED", default_value_t = 1)]
    pub synthetic_seed: u64,
}

impl BackboneArgs {
    pub fn spec(&self) -> BackboneSpec {
        BackboneSpec::for_backbone(self.backbone, self.synthetic_k)
    }

    pub fn extractor(&self) -> pvqa_core::Result<Extractor> {
        match self.backbone {
            Backbone::Synthetic => {
                if self.synthetic_k == 0 || self.synthetic_downscale == 0 {
                    return Err(Error::Validation(
                        "synthetic backbone needs positive --synthetic-k and --synthetic-downscale".into(),
                    ));
                }
                Ok(Extractor::Synthetic(SyntheticExtractor::new(
                    self.synthetic_seed,
                    self.synthetic_k,
                    self.synthetic_downscale,
                )))
            }
            other => {
                let path = self
                    .onnx_model
                    .as_ref()
                    .ok_or_else(|| Error::ProviderUnavailable(format!("{other} needs --onnx-model")))?;
                load_onnx(path, self.spec())
            }
        }
    }

    /// Cached features when `features_dir` is given, on-the-fly extraction
    /// otherwise.
    pub fn source(&self, features_dir: Option<&PathBuf>) -> pvqa_core::Result<Box<dyn MapSource>> {
        Ok(match features_dir {
            Some(dir) => Box::new(FeatureCache::new(dir, self.spec())),
            None => Box::new(ExtractingSource::new(self.extractor()?)),
        })
    }
}

#[cfg(feature = "onnx")]
fn load_onnx(path: &std::path::Path, spec: BackboneSpec) -> pvqa_core::Result<Extractor> {
    Ok(Extractor::Onnx(pvqa_core::features::OnnxExtractor::load(path, spec)?))
}

#[cfg(not(feature = "onnx"))]
fn load_onnx(path: &std::path::Path, _spec: BackboneSpec) -> pvqa_core::Result<Extractor> {
    Err(Error::ProviderUnavailable(format!(
        "cannot run {}: this build has no ONNX support (rebuild with --features onnx)",
        path.display()
    )))
}

pub enum Extractor {
    Synthetic(SyntheticExtractor),
    #[cfg(feature = "onnx")]
    Onnx(pvqa_core::features::OnnxExtractor),
}

impl Extractor {
    /// Preprocessing note recorded in sidecar metadata.
    pub fn description(&self) -> String {
        match self {
            Extractor::Synthetic(e) => e.description(),
            #[cfg(feature = "onnx")]
            Extractor::Onnx(e) => e.description(),
        }
    }

    fn inner(&self) -> &dyn FeatureExtractor {
        match self {
            Extractor::Synthetic(e) => e,
            #[cfg(feature = "onnx")]
            Extractor::Onnx(e) => e,
        }
    }
}

impl FeatureExtractor for Extractor {
    fn backbone(&self) -> &BackboneSpec {
        self.inner().backbone()
    }

    fn extract(&self, image: &Frame) -> pvqa_core::Result<FeatureMap> {
        features_for_image(image, self.inner())
    }
}
