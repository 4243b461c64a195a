use std::path::Path;

use pvqa_core::features::{verify_with_sidecar, write_with_sidecar, SidecarMeta, VideoMaps};
use pvqa_core::fr::{fr_video_score, FrMetric, Polarity};
use pvqa_core::synth::{write_dataset, SynthConfig};
use pvqa_core::{
    load_manifest, load_model, save_model, train, BackboneSpec, DatasetManifest, Error, ExtractingSource,
    FeatureCache, FeatureExtractor, FeatureSet, MapParts, MapSource, SyntheticExtractor,
};

fn small_dataset(dir: &Path) -> DatasetManifest {
    let config = SynthConfig {
        n_videos: 12,
        n_context: 2,
        n_predicted: 3,
        height: 16,
        width: 16,
        seed: 5,
        ..SynthConfig::default()
    };
    write_dataset(&config, dir).unwrap();
    load_manifest(dir.join("manifest.toml")).unwrap()
}

fn extractor() -> SyntheticExtractor {
    SyntheticExtractor::new(3, 8, 4)
}

fn fill_cache(manifest: &DatasetManifest, source: &dyn MapSource, cache: &FeatureCache) {
    for entry in &manifest.entries {
        let maps = source.video_maps(entry, MapParts::ALL).unwrap();
        let meta = SidecarMeta::for_spec(source.backbone(), "native resolution");
        write_with_sidecar(&maps.frames, &cache.frames_path(entry.id()), meta.clone()).unwrap();
        write_with_sidecar(&maps.rfd, &cache.rfd_path(entry.id()), meta).unwrap();
    }
}

#[test]
fn cached_features_match_on_the_fly_extraction() {
    let data = tempfile::tempdir().unwrap();
    let features = tempfile::tempdir().unwrap();
    let manifest = small_dataset(data.path());
    let live = ExtractingSource::new(extractor());
    let cache = FeatureCache::new(features.path(), live.backbone().clone());
    fill_cache(&manifest, &live, &cache);

    for entry in &manifest.entries {
        let spec = live.backbone();
        assert!(verify_with_sidecar(&cache.frames_path(entry.id()), spec).unwrap());
        assert!(verify_with_sidecar(&cache.rfd_path(entry.id()), spec).unwrap());
        let cached: VideoMaps = cache.video_maps(entry, MapParts::ALL).unwrap();
        assert_eq!(cached, live.video_maps(entry, MapParts::ALL).unwrap());
        assert_eq!(cached.frames.len(), 5);
        assert_eq!(cached.rfd.len(), 4);
    }

    let ids = manifest.ids();
    let from_cache = train(&manifest, &ids, &cache, 6, FeatureSet::McsRfd).unwrap();
    let from_frames = train(&manifest, &ids, &live, 6, FeatureSet::McsRfd).unwrap();
    assert_eq!(from_cache, from_frames);
}

#[test]
fn sidecar_rejects_corruption_and_foreign_backbones() {
    let data = tempfile::tempdir().unwrap();
    let features = tempfile::tempdir().unwrap();
    let manifest = small_dataset(data.path());
    let live = ExtractingSource::new(extractor());
    let cache = FeatureCache::new(features.path(), live.backbone().clone());
    fill_cache(&manifest, &live, &cache);

    let entry = &manifest.entries[0];
    let path = cache.frames_path(entry.id());
    assert!(!verify_with_sidecar(&path, &BackboneSpec::synthetic(9)).unwrap());
    assert!(!verify_with_sidecar(&path, &BackboneSpec::vgg19()).unwrap());

    let mut bytes = std::fs::read(&path).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 0x40;
    std::fs::write(&path, &bytes).unwrap();
    assert!(!verify_with_sidecar(&path, live.backbone()).unwrap());

    std::fs::remove_file(cache.rfd_path(entry.id())).unwrap();
    let err = cache.video_maps(entry, MapParts::ALL).unwrap_err();
    assert!(matches!(err, Error::ProviderUnavailable(_)), "{err}");
    // Frames alone are still readable when only frame maps are asked for.
    let frames_only = MapParts { frames: true, rfd: false };
    assert!(cache.video_maps(entry, frames_only).is_ok());
}

#[test]
fn cache_for_another_backbone_is_a_shape_error() {
    let data = tempfile::tempdir().unwrap();
    let features = tempfile::tempdir().unwrap();
    let manifest = small_dataset(data.path());
    let live = ExtractingSource::new(extractor());
    let cache = FeatureCache::new(features.path(), live.backbone().clone());
    fill_cache(&manifest, &live, &cache);

    let wider = FeatureCache::new(features.path(), BackboneSpec::synthetic(16));
    assert!(wider.video_maps(&manifest.entries[0], MapParts::ALL).is_err());
}

#[test]
fn full_reference_scores_against_ground_truth() {
    let data = tempfile::tempdir().unwrap();
    let manifest = small_dataset(data.path());
    let extractor = extractor();
    let entry = &manifest.entries[0];
    let pred = entry.load().unwrap();
    let reference = entry.load_reference().unwrap();

    let identical = fr_video_score(FrMetric::Mse, &reference, &reference, None).unwrap();
    assert_eq!(identical.per_frame, vec![0.0; 3]);
    assert_eq!(identical.polarity, Polarity::LowerIsBetter);

    let ssim_self = fr_video_score(FrMetric::Ssim, &reference, &reference, None).unwrap();
    assert!(ssim_self.per_frame.iter().all(|&s| (s - 1.0).abs() < 1e-12));

    let mse = fr_video_score(FrMetric::Mse, &pred, &reference, None).unwrap();
    assert_eq!(mse.per_frame.len(), 3);
    let mean = mse.per_frame.iter().sum::<f64>() / 3.0;
    assert!((mse.aggregate - mean).abs() < 1e-12);

    let cosine = fr_video_score(FrMetric::FeatureCosine, &pred, &reference, Some(&extractor as &dyn FeatureExtractor));
    assert!(cosine.unwrap().per_frame.iter().all(|s| (-1.0..=1.0).contains(s)));
    assert!(fr_video_score(FrMetric::FeatureCosine, &pred, &reference, None).is_err());
}

#[test]
fn saved_model_predicts_identically() {
    let data = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let manifest = small_dataset(data.path());
    let source = ExtractingSource::new(extractor());
    let ids = manifest.ids();
    let model = train(&manifest, &ids[..10], &source, 240, FeatureSet::McsRfd).unwrap();
    assert_eq!(model.pca.k_prime(), 9);

    let path = out.path().join("model.pvqm");
    save_model(&model, &path).unwrap();
    let loaded = load_model(&path).unwrap();
    assert_eq!(loaded, model);
    for entry in &manifest.entries[10..] {
        let a = model.predict_entry(entry, &source).unwrap();
        let b = loaded.predict_entry(entry, &source).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    let other = ExtractingSource::new(SyntheticExtractor::new(3, 12, 4));
    let err = loaded.predict_entry(&manifest.entries[11], &other).unwrap_err();
    assert!(matches!(err, Error::ConfigMismatch(_)), "{err}");
}
