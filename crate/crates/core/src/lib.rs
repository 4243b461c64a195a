//! Perceptual quality assessment of predicted videos.
//!
//! The learned measure compares deep features of predicted frames with the
//! last context frame after a feature-space motion search (MCS), adds
//! spatially averaged features of rescaled frame differences (RFD), reduces
//! the result with PCA and regresses MOS linearly. Around it sit
//! full-reference baselines, subjective score processing and a split-based
//! evaluation harness.

pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod fr;
pub mod mcs;
pub mod model;
pub mod pvqf;
pub mod rfd;
pub mod stats;
pub mod subjective;
pub mod synth;

pub use data::{
    load_manifest, Dataset, DatasetManifest, DistortionTag, FeatureMap, Frame, ManifestEntry, VideoMeta, VideoRecord,
};
pub use error::{Error, ErrorClass, Result};
pub use features::{
    Backbone, BackboneSpec, ExtractingSource, FeatureCache, FeatureExtractor, MapParts, MapSource, SyntheticExtractor,
};
pub use mcs::{mcs_video_features, motion_compensate, McsFeatureVector, MotionField};
pub use model::{
    assemble_features, load_model, save_model, train, train_on_table, FeatureConfig, FeatureSet, FeatureTable,
    QualityModel,
};
pub use rfd::{rescaled_frame_difference, rfd_video_features, RfdFeatureVector};
