use std::path::Path;
use std::sync::Arc;

use image::imageops::{self, FilterType};
use image::RgbImage;
use tract_onnx::prelude::*;

use super::{BackboneSpec, FeatureExtractor};
use crate::data::{FeatureMap, Frame};
use crate::error::{Error, Result};

const IMAGENET_MEAN: [f32; 3] = [0.485, 0.456, 0.406];
const IMAGENET_STD: [f32; 3] = [0.229, 0.224, 0.225];

/// Runs an exported backbone with tract. The model takes one NCHW `f32`
/// image normalized with ImageNet statistics and returns the tapped
/// activation as `1 × K × h × w`.
pub struct OnnxExtractor {
    spec: BackboneSpec,
    side: usize,
    plan: Arc<TypedRunnableModel>,
}

fn tract_err(what: &str, e: impl std::fmt::Display) -> Error {
    Error::ProviderUnavailable(format!("{what}: {e}"))
}

impl OnnxExtractor {
    /// Loads `path` for inputs of `spec.input_side` pixels square.
    pub fn load(path: impl AsRef<Path>, spec: BackboneSpec) -> Result<Self> {
        let path = path.as_ref();
        spec.validate()?;
        if spec.input_side == 0 {
            return Err(Error::Validation("ONNX backbones need a fixed input side".into()));
        }
        let side = spec.input_side;
        let plan = tract_onnx::onnx()
            .model_for_path(path)
            .and_then(|m| m.with_input_fact(0, f32::fact([1, 3, side, side]).into()))
            .and_then(|m| m.into_optimized())
            .and_then(|m| m.into_runnable())
            .map_err(|e| tract_err(&format!("loading {}", path.display()), e))?;
        Ok(Self { spec, side, plan })
    }

    /// Text recorded in sidecar metadata.
    pub fn description(&self) -> String {
        format!(
            "bilinear resize to {0}x{0}, RGB scaled to [0,1], ImageNet mean/std normalization",
            self.side
        )
    }

    fn input(&self, frame: &Frame) -> Result<Tensor> {
        let rgb = RgbImage::from_raw(frame.width() as u32, frame.height() as u32, frame.samples().to_vec())
            .ok_or_else(|| Error::ShapeMismatch("frame buffer does not match its dimensions".into()))?;
        let resized = imageops::resize(&rgb, self.side as u32, self.side as u32, FilterType::Triangle);
        let array = tract_ndarray::Array4::from_shape_fn((1, 3, self.side, self.side), |(_, c, y, x)| {
            let v = resized.get_pixel(x as u32, y as u32)[c] as f32 / 255.0;
            (v - IMAGENET_MEAN[c]) / IMAGENET_STD[c]
        });
        Ok(array.into())
    }
}

impl FeatureExtractor for OnnxExtractor {
    fn backbone(&self) -> &BackboneSpec {
        &self.spec
    }

    fn extract(&self, image: &Frame) -> Result<FeatureMap> {
        let outputs = self
            .plan
            .run(tvec!(self.input(image)?.into()))
            .map_err(|e| tract_err("inference", e))?;
        let out = outputs[0].to_plain_array_view::<f32>().map_err(|e| tract_err("reading output", e))?;
        let shape = out.shape();
        if shape.len() != 4 || shape[0] != 1 {
            return Err(Error::ShapeMismatch(format!("backbone output has shape {shape:?}, expected 1xKxhxw")));
        }
        let (k, h, w) = (shape[1], shape[2], shape[3]);
        if k != self.spec.k {
            return Err(Error::ShapeMismatch(format!("backbone produced k={k}, spec declares k={}", self.spec.k)));
        }
        FeatureMap::from_fn(h, w, k, |i, j, c| out[[0, c, i, j]])
    }
}
