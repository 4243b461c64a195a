//! Repeated random train/test splits, correlation reports and sweeps.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ManifestEntry;
use crate::error::{Error, Result};
use crate::features::FeatureExtractor;
use crate::fr::{fr_video_score, FrMetric};
use crate::model::{train_on_table, FeatureTable};
use crate::stats::{fit_logistic, median, plcc, rmse, sample_std, srocc};

pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;
pub const DEFAULT_K_PRIME: usize = 240;
pub const K_PRIME_SWEEP: [usize; 6] = [40, 80, 120, 160, 200, 240];
pub const TRAINING_SIZE_SWEEP: [f64; 8] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];
/// Absolute-error threshold separating good and bad predictions in the
/// MCS-vs-RFD complementarity scatter.
pub const COMPLEMENTARITY_THRESHOLD: f64 = 15.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trial {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub train_fraction: f64,
    pub trials: Vec<Trial>,
}

impl SplitPlan {
    pub fn n_trials(&self) -> usize {
        self.trials.len()
    }
}

/// `⌈fraction · n⌉`, ignoring floating-point noise just above an integer.
pub fn train_count(n: usize, fraction: f64) -> usize {
    (fraction * n as f64 - 1e-9).ceil().max(0.0) as usize
}

/// Trial `t` shuffles `ids` with a generator seeded by `seed + t`; the first
/// `⌈fraction · n⌉` ids train and the rest test.
pub fn make_splits(ids: &[String], seed: u64, n_trials: usize, fraction: f64) -> Result<SplitPlan> {
    if ids.len() < 5 {
        return Err(Error::InsufficientData(format!("splitting needs at least 5 videos, got {}", ids.len())));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Validation(format!("train fraction {fraction} is not in (0, 1)")));
    }
    let n_train = train_count(ids.len(), fraction).clamp(1, ids.len() - 1);
    let trials = (0..n_trials as u64)
        .map(|t| {
            let mut order = ids.to_vec();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(t)));
            let test = order.split_off(n_train);
            Trial { train: order, test }
        })
        .collect();
    Ok(SplitPlan {
        seed,
        train_fraction: fraction,
        trials,
    })
}

/// Test-set performance of one trial. Correlations are `None` when
/// undefined (constant predictions or targets).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub srocc: Option<f64>,
    pub plcc: Option<f64>,
    pub rmse: Option<f64>,
    /// Components actually used, for trained models.
    pub k_prime: Option<usize>,
}

/// JSON has no NaN; an empty summary is written as `null`.
mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// Median and spread over the trials where a value is defined; NaN when
/// none is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    #[serde(with = "nan_as_null")]
    pub median: f64,
    /// Sample standard deviation across defined trials.
    #[serde(with = "nan_as_null")]
    pub std: f64,
    pub undefined: usize,
}

impl Summary {
    fn of(values: impl Iterator<Item = Option<f64>>) -> Self {
        let mut defined = Vec::new();
        let mut undefined = 0;
        for v in values {
            match v {
                Some(v) => defined.push(v),
                None => undefined += 1,
            }
        }
        Summary {
            median: median(&defined),
            std: if defined.is_empty() { f64::NAN } else { sample_std(&defined) },
            undefined,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub label: String,
    pub srocc: Summary,
    pub plcc: Summary,
    pub rmse: Summary,
    pub trials: Vec<TrialMetrics>,
}

impl BenchmarkReport {
    pub fn from_trials(label: impl Into<String>, trials: Vec<TrialMetrics>) -> Self {
        Self {
            label: label.into(),
            srocc: Summary::of(trials.iter().map(|t| t.srocc)),
            plcc: Summary::of(trials.iter().map(|t| t.plcc)),
            rmse: Summary::of(trials.iter().map(|t| t.rmse)),
            trials,
        }
    }
}

/// One summary row per report.
pub fn write_reports_csv(reports: &[BenchmarkReport], writer: impl Write) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::parse("report table", e);
    csv.write_record([
        "label",
        "trials",
        "srocc_median",
        "srocc_std",
        "plcc_median",
        "plcc_std",
        "rmse_median",
        "rmse_std",
        "undefined_trials",
    ])
    .map_err(err)?;
    for r in reports {
        let undefined = r.srocc.undefined.max(r.plcc.undefined).max(r.rmse.undefined);
        csv.write_record([
            r.label.clone(),
            r.trials.len().to_string(),
            r.srocc.median.to_string(),
            r.srocc.std.to_string(),
            r.plcc.median.to_string(),
            r.plcc.std.to_string(),
            r.rmse.median.to_string(),
            r.rmse.std.to_string(),
            undefined.to_string(),
        ])
        .map_err(err)?;
    }
    csv.flush().map_err(|e| Error::io("<report table>", e))
}

/// Full reports, per-trial values included.
pub fn write_reports_json(reports: &[BenchmarkReport], writer: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(writer, reports).map_err(|e| Error::parse("report JSON", e))
}

fn indices(table: &FeatureTable, ids: &[String]) -> Result<Vec<usize>> {
    ids.iter()
        .map(|id| {
            table
                .index_of(id)
                .ok_or_else(|| Error::Validation(format!("split references unknown video {id}")))
        })
        .collect()
}

fn assert_disjoint(trial: &Trial) {
    debug_assert!(trial.train.iter().all(|id| !trial.test.contains(id)), "train and test overlap");
}

fn trained_trial(table: &FeatureTable, train: &[String], test: &[String], k_prime: usize) -> Result<TrialMetrics> {
    let (train, test) = (indices(table, train)?, indices(table, test)?);
    let model = train_on_table(table, &train, k_prime)?;
    let pred = model.predict_table(table, &test)?;
    let truth = table.targets(&test)?;
    Ok(TrialMetrics {
        srocc: srocc(&pred, &truth),
        plcc: plcc(&pred, &truth),
        rmse: Some(rmse(&pred, &truth)),
        k_prime: Some(model.pca.k_prime()),
    })
}

/// Trains PCA + regression on each trial's training rows and scores the
/// test rows. Trials run in parallel; results keep trial order.
pub fn evaluate_trained(
    label: impl Into<String>,
    table: &FeatureTable,
    plan: &SplitPlan,
    k_prime: usize,
) -> Result<BenchmarkReport> {
    let trials = plan
        .trials
        .par_iter()
        .map(|t| {
            assert_disjoint(t);
            trained_trial(table, &t.train, &t.test, k_prime)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchmarkReport::from_trials(label, trials))
}

/// Evaluates a measure that needs no training. Per trial a logistic map is
/// fitted on the training videos and applied to the test scores for PLCC
/// and RMSE; SROCC uses the raw test scores. Correlation magnitudes are
/// reported.
pub fn evaluate_untrained(
    label: impl Into<String>,
    ids: &[String],
    scores: &[f64],
    mos: &[f64],
    plan: &SplitPlan,
) -> Result<BenchmarkReport> {
    if ids.len() != scores.len() || ids.len() != mos.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} ids, {} scores, {} MOS values",
            ids.len(),
            scores.len(),
            mos.len()
        )));
    }
    let position = |id: &String| {
        ids.iter()
            .position(|i| i == id)
            .ok_or_else(|| Error::Validation(format!("split references unknown video {id}")))
    };
    let trials = plan
        .trials
        .par_iter()
        .map(|t| {
            assert_disjoint(t);
            let train: Vec<usize> = t.train.iter().map(position).collect::<Result<_>>()?;
            let test: Vec<usize> = t.test.iter().map(position).collect::<Result<_>>()?;
            let pick = |v: &[f64], idx: &[usize]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
            let (train_s, train_q) = (pick(scores, &train), pick(mos, &train));
            let (test_s, test_q) = (pick(scores, &test), pick(mos, &test));
            let (plcc_v, rmse_v) = match fit_logistic(&train_s, &train_q) {
                Ok(map) => {
                    let mapped = map.apply_all(&test_s);
                    (plcc(&mapped, &test_q).map(f64::abs), Some(rmse(&mapped, &test_q)))
                }
                Err(Error::Numerical(_)) => (None, None),
                Err(e) => return Err(e),
            };
            Ok(TrialMetrics {
                srocc: srocc(&test_s, &test_q).map(f64::abs),
                plcc: plcc_v,
                rmse: rmse_v,
                k_prime: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = BenchmarkReport::from_trials(label, trials);
    if report.srocc.undefined + report.plcc.undefined > 0 {
        log::warn!(
            "{}: {} trials with undefined SROCC, {} with undefined PLCC",
            report.label,
            report.srocc.undefined,
            report.plcc.undefined
        );
    }
    Ok(report)
}

/// Nested training subsets per trial with the test set held fixed. The
/// subset for fraction `f` is the first `⌈f · n⌉` training ids of the
/// trial, and K′ equals the subset size (rank-clamped).
pub fn sweep_training_size(table: &FeatureTable, plan: &SplitPlan, fractions: &[f64]) -> Result<Vec<BenchmarkReport>> {
    let n = table.len();
    fractions
        .iter()
        .map(|&f| {
            let size = train_count(n, f);
            if size < 2 || plan.trials.iter().any(|t| t.train.len() < size) {
                return Err(Error::Validation(format!(
                    "training fraction {f} needs {size} training videos per trial; the plan has {}",
                    plan.trials.first().map_or(0, |t| t.train.len())
                )));
            }
            let trials = plan
                .trials
                .par_iter()
                .map(|t| trained_trial(table, &t.train[..size], &t.test, size))
                .collect::<Result<Vec<_>>>()?;
            Ok(BenchmarkReport::from_trials(format!("train={:.0}% ({size})", f * 100.0), trials))
        })
        .collect()
}

pub fn sweep_k_prime(table: &FeatureTable, plan: &SplitPlan, values: &[usize]) -> Result<Vec<BenchmarkReport>> {
    values
        .iter()
        .map(|&k| evaluate_trained(format!("k'={k}"), table, plan, k))
        .collect()
}

/// Scores every entry with a full-reference metric against its reference
/// frames. Videos are processed in parallel.
pub fn fr_scores(entries: &[&ManifestEntry], metric: FrMetric, extractor: Option<&dyn FeatureExtractor>) -> Result<Vec<f64>> {
    entries
        .par_iter()
        .map(|e| {
            let pred = e.load()?;
            let reference = e.load_reference()?;
            Ok(fr_video_score(metric, &pred, &reference, extractor)?.aggregate)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplementarityPoint {
    pub id: String,
    pub mos: f64,
    pub mcs_error: f64,
    pub rfd_error: f64,
}

/// Quadrant counts of the error scatter, "good" meaning an absolute error
/// at most the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QuadrantCounts {
    pub both_good: usize,
    pub only_mcs_good: usize,
    pub only_rfd_good: usize,
    pub both_bad: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Complementarity {
    pub threshold: f64,
    pub points: Vec<ComplementarityPoint>,
    pub counts: QuadrantCounts,
}

/// Per-video absolute test errors of an MCS-only and an RFD-only model,
/// trained on the same split.
pub fn complementarity(
    mcs: &FeatureTable,
    rfd: &FeatureTable,
    trial: &Trial,
    k_prime: usize,
    threshold: f64,
) -> Result<Complementarity> {
    let errors = |table: &FeatureTable| -> Result<Vec<f64>> {
        let train = indices(table, &trial.train)?;
        let test = indices(table, &trial.test)?;
        let model = train_on_table(table, &train, k_prime)?;
        let pred = model.predict_table(table, &test)?;
        Ok(pred.iter().zip(table.targets(&test)?).map(|(p, y)| (p - y).abs()).collect())
    };
    let (em, er) = (errors(mcs)?, errors(rfd)?);
    let truth = mcs.targets(&indices(mcs, &trial.test)?)?;
    let mut counts = QuadrantCounts::default();
    let points = trial
        .test
        .iter()
        .enumerate()
        .map(|(i, id)| {
            match (em[i] <= threshold, er[i] <= threshold) {
                (true, true) => counts.both_good += 1,
                (true, false) => counts.only_mcs_good += 1,
                (false, true) => counts.only_rfd_good += 1,
                (false, false) => counts.both_bad += 1,
            }
            ComplementarityPoint {
                id: id.clone(),
                mos: truth[i],
                mcs_error: em[i],
                rfd_error: er[i],
            }
        })
        .collect();
    Ok(Complementarity {
        threshold,
        points,
        counts,
    })
}
