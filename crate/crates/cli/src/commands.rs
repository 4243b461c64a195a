use std::path::Path;
use std::str::FromStr;

use anyhow::{Context, Result};
use pvqa_core::eval::{
    complementarity, evaluate_trained, evaluate_untrained, fr_scores, make_splits, sweep_k_prime,
    sweep_training_size, write_reports_csv, write_reports_json, BenchmarkReport, SplitPlan, K_PRIME_SWEEP,
    TRAINING_SIZE_SWEEP,
};
use pvqa_core::features::{maps_for_video, verify_with_sidecar, write_with_sidecar, SidecarMeta};
use pvqa_core::fr::FrMetric;
use pvqa_core::model::encode_model;
use pvqa_core::subjective::{
    compute_mos, reject_outliers, split_half_consistency, zscore, MosScale, StdDenominator, SubjectScoreTable,
};
use pvqa_core::synth::{write_dataset, SynthConfig};
use pvqa_core::{
    load_manifest, load_model, train_on_table, DatasetManifest, Error, FeatureCache, FeatureExtractor, FeatureSet,
    FeatureTable, ManifestEntry, MapParts, MapSource,
};
use rayon::prelude::*;

use crate::output::Outputs;
use crate::{
    usage, AblateArgs, BenchmarkArgs, DataArgs, Denominator, FeaturesArgs, PredictArgs, ProtocolArgs, ReportOutputs,
    Scale, SubjectiveArgs, SweepArgs, SweepKind, SynthArgs, TrainArgs,
};

fn require_file(path: &Path, what: &str) -> pvqa_core::Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Validation(format!("{what} {} does not exist", path.display())))
    }
}

fn require_dir(path: &Path, what: &str) -> pvqa_core::Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Error::Validation(format!("{what} {} is not a directory", path.display())))
    }
}

/// The directory an output file will be written into must already exist.
fn require_parent(path: &Path) -> pvqa_core::Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => require_dir(p, "output directory"),
        _ => Ok(()),
    }
}

fn check_data(data: &DataArgs) -> Result<DatasetManifest> {
    require_file(&data.manifest, "manifest")?;
    if let Some(dir) = &data.features_dir {
        require_dir(dir, "features directory")?;
    }
    Ok(load_manifest(&data.manifest).with_context(|| format!("loading {}", data.manifest.display()))?)
}

fn check_report_outputs(outputs: &ReportOutputs) -> Result<()> {
    for path in outputs.out.iter().chain(&outputs.csv) {
        require_parent(path)?;
    }
    Ok(())
}

fn rated_entries(manifest: &DatasetManifest) -> Result<Vec<&ManifestEntry>> {
    if let Some(e) = manifest.entries.iter().find(|e| e.meta.mos.is_none()) {
        return Err(Error::Validation(format!("video {} has no MOS", e.id())).into());
    }
    Ok(manifest.entries.iter().collect())
}

fn plan_for(ids: &[String], protocol: &ProtocolArgs) -> Result<SplitPlan> {
    if protocol.splits == 0 {
        return Err(usage("--splits must be positive"));
    }
    Ok(make_splits(ids, protocol.seed, protocol.splits, protocol.train_fraction)?)
}

fn build_table(entries: &[&ManifestEntry], source: &dyn MapSource, set: FeatureSet) -> Result<FeatureTable> {
    Ok(FeatureTable::build(entries, source, set).with_context(|| format!("assembling {set} features"))?)
}

fn fmt_metric(v: f64) -> String {
    if v.is_nan() {
        "-".into()
    } else {
        format!("{v:.4}")
    }
}

fn print_reports(reports: &[BenchmarkReport]) {
    let width = reports.iter().map(|r| r.label.len()).max().unwrap_or(0).max(5);
    println!(
        "{:<width$}  {:>6}  {:>8}  {:>7}  {:>8}  {:>7}  {:>8}",
        "label", "trials", "SROCC", "±", "PLCC", "±", "RMSE"
    );
    for r in reports {
        println!(
            "{:<width$}  {:>6}  {:>8}  {:>7}  {:>8}  {:>7}  {:>8}",
            r.label,
            r.trials.len(),
            fmt_metric(r.srocc.median),
            fmt_metric(r.srocc.std),
            fmt_metric(r.plcc.median),
            fmt_metric(r.plcc.std),
            fmt_metric(r.rmse.median),
        );
    }
}

fn write_reports(reports: &[BenchmarkReport], outputs: &ReportOutputs, files: &mut Outputs) -> Result<()> {
    if let Some(path) = &outputs.out {
        let mut bytes = Vec::new();
        write_reports_json(reports, &mut bytes)?;
        files.write(path, &bytes)?;
    }
    if let Some(path) = &outputs.csv {
        let mut bytes = Vec::new();
        write_reports_csv(reports, &mut bytes)?;
        files.write(path, &bytes)?;
    }
    Ok(())
}

enum Extraction {
    Reused,
    Extracted,
}

fn extract_one(entry: &ManifestEntry, cache: &FeatureCache, extractor: &crate::backbone::Extractor) -> Result<Extraction> {
    let spec = extractor.backbone();
    let paths = [cache.frames_path(entry.id()), cache.rfd_path(entry.id())];
    let mut valid = true;
    for path in &paths {
        if !verify_with_sidecar(path, spec)? {
            if path.exists() {
                log::warn!("{}: checksum or metadata mismatch, re-extracting", path.display());
            }
            valid = false;
        }
    }
    if valid {
        return Ok(Extraction::Reused);
    }
    let result = (|| -> pvqa_core::Result<()> {
        let video = entry.load()?;
        let maps = maps_for_video(&video, extractor, MapParts::ALL)?;
        let meta = SidecarMeta::for_spec(spec, extractor.description());
        write_with_sidecar(&maps.frames, &paths[0], meta.clone())?;
        write_with_sidecar(&maps.rfd, &paths[1], meta)
    })();
    if let Err(e) = result {
        for path in &paths {
            let _ = std::fs::remove_file(path);
            let _ = std::fs::remove_file(SidecarMeta::path_for(path));
        }
        return Err(e.into());
    }
    Ok(Extraction::Extracted)
}

pub fn features(a: FeaturesArgs) -> Result<()> {
    require_file(&a.manifest, "manifest")?;
    let manifest = load_manifest(&a.manifest).with_context(|| format!("loading {}", a.manifest.display()))?;
    let extractor = a.backbone.extractor()?;
    std::fs::create_dir_all(&a.features_dir)
        .map_err(|e| Error::Validation(format!("cannot create {}: {e}", a.features_dir.display())))?;
    let cache = FeatureCache::new(&a.features_dir, extractor.backbone().clone());

    let results: Vec<_> = manifest
        .entries
        .par_iter()
        .map(|e| (e.id(), extract_one(e, &cache, &extractor)))
        .collect();
    let (mut extracted, mut reused) = (0, 0);
    let mut failures = Vec::new();
    for (id, r) in results {
        match r {
            Ok(Extraction::Extracted) => extracted += 1,
            Ok(Extraction::Reused) => reused += 1,
            Err(e) => failures.push((id, e)),
        }
    }
    println!("extracted {extracted}, reused {reused}, failed {}", failures.len());
    for (id, e) in &failures {
        eprintln!("  {id}: {e:#}");
    }
    match failures.into_iter().next() {
        Some((_, first)) => Err(first.context(format!(
            "feature extraction failed for {} of {} videos",
            manifest.len() - extracted - reused,
            manifest.len()
        ))),
        None => Ok(()),
    }
}

pub fn train(a: TrainArgs) -> Result<()> {
    let manifest = check_data(&a.data)?;
    require_parent(&a.model_path)?;
    let entries = rated_entries(&manifest)?;
    let source = a.data.backbone.source(a.data.features_dir.as_ref())?;
    let table = build_table(&entries, source.as_ref(), a.model.feature_set)?;
    let all: Vec<usize> = (0..table.len()).collect();
    let model = train_on_table(&table, &all, a.model.k_prime).context("training")?;

    let mut files = Outputs::new();
    files.write(&a.model_path, &encode_model(&model)?)?;
    files.commit();
    println!(
        "trained on {} videos: {} features of dimension {}, K'={} (requested {})",
        table.len(),
        a.model.feature_set,
        table.dim(),
        model.pca.k_prime(),
        model.pca.requested()
    );
    println!("model written to {}", a.model_path.display());
    Ok(())
}

pub fn predict(a: PredictArgs) -> Result<()> {
    let manifest = check_data(&a.data)?;
    require_file(&a.model, "model")?;
    if let Some(out) = &a.out {
        require_parent(out)?;
    }
    let model = load_model(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let entries = if a.id.is_empty() {
        manifest.entries.iter().collect()
    } else {
        manifest.select(&a.id)?
    };
    let source = a.data.backbone.source(a.data.features_dir.as_ref())?;
    let scores = entries
        .par_iter()
        .map(|e| model.predict_entry(e, source.as_ref()).with_context(|| format!("scoring {}", e.id())))
        .collect::<Result<Vec<_>>>()?;

    let mut csv = String::from("video_id,score\n");
    for (e, s) in entries.iter().zip(&scores) {
        println!("{}\t{s:.6}", e.id());
        csv.push_str(&format!("{},{s}\n", e.id()));
    }
    if let Some(out) = &a.out {
        let mut files = Outputs::new();
        files.write(out, csv.as_bytes())?;
        files.commit();
    }
    Ok(())
}

enum Measure {
    Ours,
    Fr(FrMetric),
}

pub fn benchmark(a: BenchmarkArgs) -> Result<()> {
    let measures = a
        .metric
        .iter()
        .map(|m| match m.trim() {
            "ours" => Ok(Measure::Ours),
            other => FrMetric::from_str(other)
                .map(Measure::Fr)
                .map_err(|_| usage(format!("unknown metric {other:?}"))),
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = check_data(&a.data)?;
    check_report_outputs(&a.outputs)?;
    let entries = rated_entries(&manifest)?;
    let ids: Vec<String> = entries.iter().map(|e| e.id().to_string()).collect();
    let mos: Vec<f64> = entries.iter().map(|e| e.meta.mos.unwrap_or(f64::NAN)).collect();
    let plan = plan_for(&ids, &a.protocol)?;

    let mut reports = Vec::new();
    for measure in &measures {
        let report = match measure {
            Measure::Ours => {
                let source = a.data.backbone.source(a.data.features_dir.as_ref())?;
                let table = build_table(&entries, source.as_ref(), a.model.feature_set)?;
                evaluate_trained(format!("ours ({})", a.model.feature_set), &table, &plan, a.model.k_prime)?
            }
            Measure::Fr(metric) => {
                let extractor = if metric.needs_features() {
                    Some(a.data.backbone.extractor()?)
                } else {
                    None
                };
                let scores = fr_scores(&entries, *metric, extractor.as_ref().map(|e| e as &dyn FeatureExtractor))
                    .with_context(|| format!("computing {metric}"))?;
                evaluate_untrained(metric.name(), &ids, &scores, &mos, &plan)?
            }
        };
        reports.push(report);
    }

    print_reports(&reports);
    let mut files = Outputs::new();
    write_reports(&reports, &a.outputs, &mut files)?;
    files.commit();
    Ok(())
}

pub fn sweep(a: SweepArgs) -> Result<()> {
    let manifest = check_data(&a.data)?;
    check_report_outputs(&a.outputs)?;
    let entries = rated_entries(&manifest)?;
    let ids: Vec<String> = entries.iter().map(|e| e.id().to_string()).collect();
    let plan = plan_for(&ids, &a.protocol)?;
    let parse_err = |v: &String| usage(format!("invalid sweep value {v:?}"));

    let source = a.data.backbone.source(a.data.features_dir.as_ref())?;
    let table = build_table(&entries, source.as_ref(), a.feature_set)?;
    let reports = match a.kind {
        SweepKind::KPrime => {
            let values = if a.values.is_empty() {
                K_PRIME_SWEEP.to_vec()
            } else {
                a.values
                    .iter()
                    .map(|v| v.trim().parse::<usize>().ok().filter(|&k| k > 0).ok_or_else(|| parse_err(v)))
                    .collect::<Result<_>>()?
            };
            sweep_k_prime(&table, &plan, &values)?
        }
        SweepKind::TrainSize => {
            let values = if a.values.is_empty() {
                TRAINING_SIZE_SWEEP.to_vec()
            } else {
                a.values
                    .iter()
                    .map(|v| v.trim().parse::<f64>().map_err(|_| parse_err(v)))
                    .collect::<Result<_>>()?
            };
            sweep_training_size(&table, &plan, &values)?
        }
    };

    print_reports(&reports);
    let mut files = Outputs::new();
    write_reports(&reports, &a.outputs, &mut files)?;
    files.commit();
    Ok(())
}

pub fn ablate(a: AblateArgs) -> Result<()> {
    let manifest = check_data(&a.data)?;
    check_report_outputs(&a.outputs)?;
    if let Some(path) = &a.complementarity {
        require_parent(path)?;
    }
    let entries = rated_entries(&manifest)?;
    let ids: Vec<String> = entries.iter().map(|e| e.id().to_string()).collect();
    let plan = plan_for(&ids, &a.protocol)?;
    let source = a.data.backbone.source(a.data.features_dir.as_ref())?;

    let mut reports = Vec::new();
    for set in FeatureSet::ALL {
        let table = build_table(&entries, source.as_ref(), set)?;
        reports.push(evaluate_trained(set.name(), &table, &plan, a.k_prime)?);
    }
    print_reports(&reports);

    let mut files = Outputs::new();
    write_reports(&reports, &a.outputs, &mut files)?;
    if let Some(path) = &a.complementarity {
        let mcs = build_table(&entries, source.as_ref(), FeatureSet::Mcs)?;
        let rfd = build_table(&entries, source.as_ref(), FeatureSet::Rfd)?;
        let result = complementarity(&mcs, &rfd, &plan.trials[0], a.k_prime, a.threshold)?;
        let c = result.counts;
        println!(
            "complementarity (|error| <= {}): both good {}, only MCS good {}, only RFD good {}, both bad {}",
            a.threshold, c.both_good, c.only_mcs_good, c.only_rfd_good, c.both_bad
        );
        files.write(path, &serde_json::to_vec_pretty(&result)?)?;
    }
    files.commit();
    Ok(())
}

pub fn subjective(a: SubjectiveArgs) -> Result<()> {
    require_file(&a.ratings, "ratings table")?;
    require_parent(&a.out)?;
    let seed = match (a.split_half, a.seed) {
        (0, s) => s,
        (_, Some(s)) => Some(s),
        (_, None) => return Err(usage("--split-half needs --seed")),
    };
    let table = SubjectScoreTable::read_csv(&a.ratings).with_context(|| format!("reading {}", a.ratings.display()))?;
    let denominator = match a.denominator {
        Denominator::Population => StdDenominator::Population,
        Denominator::Sample => StdDenominator::Sample,
    };
    let z = zscore(&table, denominator);
    let screening = reject_outliers(&z);
    let scale = match a.scale {
        Scale::MinMax => MosScale::MinMax,
        Scale::FixedZ => MosScale::FixedZ,
    };
    let mos = compute_mos(&z, &screening, scale)?;

    println!(
        "{} ratings from {} subjects over {} videos",
        table.ratings().len(),
        table.subjects().len(),
        mos.rows.len()
    );
    if screening.outliers.is_empty() {
        println!("outliers: none");
    } else {
        println!("outliers: {}", screening.outliers.join(", "));
    }
    if let Some(seed) = seed.filter(|_| a.split_half > 0) {
        let r = split_half_consistency(&z, &screening.inliers, a.split_half, seed)?;
        println!("split-half PLCC over {} rounds: {r:.4}", a.split_half);
    }

    let mut bytes = Vec::new();
    mos.write_csv(&mut bytes)?;
    let mut files = Outputs::new();
    files.write(&a.out, &bytes)?;
    files.commit();
    println!("MOS table written to {}", a.out.display());
    Ok(())
}

pub fn synth(a: SynthArgs) -> Result<()> {
    if a.out.exists() {
        return Err(Error::Validation(format!("{} already exists", a.out.display())).into());
    }
    require_parent(&a.out)?;
    if a.videos == 0 || a.n_context == 0 || a.n_predicted == 0 || a.height == 0 || a.width == 0 {
        return Err(usage("synthetic dataset sizes must be positive"));
    }
    if !(a.noise >= 0.0 && a.max_blur >= 0.0) {
        return Err(usage("--noise and --max-blur must be nonnegative"));
    }
    let config = SynthConfig {
        n_videos: a.videos,
        n_context: a.n_context,
        n_predicted: a.n_predicted,
        height: a.height,
        width: a.width,
        seed: a.seed,
        mos_noise: a.noise,
        max_blur: a.max_blur,
    };
    let mut files = Outputs::new();
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    files.track_dir(&a.out);
    write_dataset(&config, &a.out)?;
    files.commit();
    println!("wrote {} videos; manifest at {}", a.videos, a.out.join("manifest.toml").display());
    Ok(())
}
