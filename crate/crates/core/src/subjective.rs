//! Subjective score processing: per-session Z-scores, BT.500-11 subject
//! screening, rescaled MOS, and split-half consistency.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{median, plcc, sample_std};

/// One raw rating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub subject_id: String,
    pub session: u32,
    pub video_id: String,
    pub score: f64,
}

/// Raw per-subject, per-session ratings.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectScoreTable {
    ratings: Vec<Rating>,
}

impl SubjectScoreTable {
    /// Checks that scores lie in `[0, 100]` and that no subject rates the
    /// same video twice in one session.
    pub fn new(ratings: Vec<Rating>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for r in &ratings {
            if !(0.0..=100.0).contains(&r.score) {
                return Err(Error::Validation(format!(
                    "score {} of subject {} on {} is outside [0, 100]",
                    r.score, r.subject_id, r.video_id
                )));
            }
            if !seen.insert((&r.subject_id, r.session, &r.video_id)) {
                return Err(Error::Validation(format!(
                    "subject {} rated {} twice in session {}",
                    r.subject_id, r.video_id, r.session
                )));
            }
        }
        Ok(Self { ratings })
    }

    pub fn ratings(&self) -> &[Rating] {
        &self.ratings
    }

    pub fn subjects(&self) -> BTreeSet<&str> {
        self.ratings.iter().map(|r| r.subject_id.as_str()).collect()
    }

    /// Reads a CSV with header `subject_id,session,video_id,score`.
    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let ratings = csv
            .deserialize()
            .collect::<std::result::Result<Vec<Rating>, _>>()
            .map_err(|e| Error::parse("ratings table", e))?;
        Self::new(ratings)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(std::io::BufReader::new(file))
    }
}

/// Denominator of the within-group standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StdDenominator {
    /// `n`: a two-rating group maps to ±1.
    #[default]
    Population,
    /// `n − 1`
    Sample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZRating {
    pub subject_id: String,
    pub session: u32,
    pub video_id: String,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZScoreTable {
    pub scores: Vec<ZRating>,
    /// `(subject, session)` groups with fewer than two ratings or zero
    /// spread; their ratings are left out of `scores`.
    pub degenerate: Vec<(String, u32)>,
}

impl ZScoreTable {
    pub fn subjects(&self) -> BTreeSet<&str> {
        self.scores.iter().map(|r| r.subject_id.as_str()).collect()
    }
}

/// Standardizes every rating by the mean and standard deviation of its
/// `(subject, session)` group.
pub fn zscore(table: &SubjectScoreTable, denominator: StdDenominator) -> ZScoreTable {
    let mut groups: BTreeMap<(&str, u32), Vec<&Rating>> = BTreeMap::new();
    for r in &table.ratings {
        groups.entry((r.subject_id.as_str(), r.session)).or_default().push(r);
    }
    let mut scores = Vec::with_capacity(table.ratings.len());
    let mut degenerate = Vec::new();
    for ((subject, session), group) in groups {
        let n = group.len() as f64;
        let mean = group.iter().map(|r| r.score).sum::<f64>() / n;
        let ss: f64 = group.iter().map(|r| (r.score - mean).powi(2)).sum();
        let denom = match denominator {
            StdDenominator::Population => n,
            StdDenominator::Sample => n - 1.0,
        };
        let std = (ss / denom).sqrt();
        if group.len() < 2 || !(std > 0.0) {
            log::warn!("subject {subject} session {session}: no rating spread, group excluded");
            degenerate.push((subject.to_string(), session));
            continue;
        }
        scores.extend(group.into_iter().map(|r| ZRating {
            subject_id: r.subject_id.clone(),
            session: r.session,
            video_id: r.video_id.clone(),
            z: (r.score - mean) / std,
        }));
    }
    ZScoreTable { scores, degenerate }
}

/// Outcome of subject screening.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Screening {
    pub inliers: Vec<String>,
    pub outliers: Vec<String>,
}

const REJECT_FRACTION: f64 = 0.05;
const REJECT_SYMMETRY: f64 = 0.3;

/// BT.500-11 subject rejection over Z-scores.
///
/// For each video the mean ū, standard deviation s and kurtosis β₂ of its
/// ratings set a band `ū ± c·s` (c = 2 for a near-normal β₂ in [2, 4],
/// √20 otherwise). A subject is rejected when more than 5% of their ratings
/// fall outside the band and the excursions are not lopsided
/// (`|P − Q| / (P + Q) < 0.3`). Videos whose ratings have no spread
/// contribute no excursions.
pub fn reject_outliers(table: &ZScoreTable) -> Screening {
    let mut by_video: BTreeMap<&str, Vec<&ZRating>> = BTreeMap::new();
    for r in &table.scores {
        by_video.entry(r.video_id.as_str()).or_default().push(r);
    }
    // subject → (P, Q, n)
    let mut counts: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
    for r in &table.scores {
        counts.entry(r.subject_id.as_str()).or_default().2 += 1;
    }
    if counts.len() < 2 {
        return Screening {
            inliers: counts.keys().map(|s| s.to_string()).collect(),
            outliers: Vec::new(),
        };
    }
    for ratings in by_video.values() {
        let z: Vec<f64> = ratings.iter().map(|r| r.z).collect();
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let s = sample_std(&z);
        if s <= 1e-12 * (1.0 + mean.abs()) {
            continue;
        }
        let m2 = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let m4 = z.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
        let beta2 = m4 / (m2 * m2);
        let c = if (2.0..=4.0).contains(&beta2) { 2.0 } else { 20f64.sqrt() };
        for r in ratings {
            let entry = counts.get_mut(r.subject_id.as_str()).expect("subject counted above");
            if r.z >= mean + c * s {
                entry.0 += 1;
            }
            if r.z <= mean - c * s {
                entry.1 += 1;
            }
        }
    }
    let mut screening = Screening::default();
    for (subject, (p, q, n)) in counts {
        let excursions = (p + q) as f64;
        let rejected =
            excursions / n as f64 > REJECT_FRACTION && (p as f64 - q as f64).abs() / excursions < REJECT_SYMMETRY;
        if rejected {
            screening.outliers.push(subject.to_string());
        } else {
            screening.inliers.push(subject.to_string());
        }
    }
    screening
}

/// How Z-scores are mapped onto `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MosScale {
    /// Global minimum to 0, global maximum to 100.
    #[default]
    MinMax,
    /// `(z + 3) · 100 / 6`, clamped to `[0, 100]`.
    FixedZ,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosRow {
    pub video_id: String,
    pub mos: f64,
    pub count: usize,
    /// Sample standard deviation of the rescaled ratings.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MosTable {
    pub rows: Vec<MosRow>,
    pub inliers: Vec<String>,
    pub outliers: Vec<String>,
}

impl MosTable {
    pub fn get(&self, video_id: &str) -> Option<&MosRow> {
        self.rows.iter().find(|r| r.video_id == video_id)
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        for row in &self.rows {
            csv.serialize(row).map_err(|e| Error::parse("MOS table", e))?;
        }
        csv.flush().map_err(|e| Error::io("<MOS table>", e))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Rescales the Z-scores of `inliers` and averages them per video.
///
/// Every video in the table must keep at least one inlier rating.
pub fn compute_mos(table: &ZScoreTable, screening: &Screening, scale: MosScale) -> Result<MosTable> {
    let inliers: BTreeSet<&str> = screening.inliers.iter().map(String::as_str).collect();
    let videos: BTreeSet<&str> = table.scores.iter().map(|r| r.video_id.as_str()).collect();
    let kept: Vec<&ZRating> = table
        .scores
        .iter()
        .filter(|r| inliers.contains(r.subject_id.as_str()))
        .collect();
    let map: Box<dyn Fn(f64) -> f64> = match scale {
        MosScale::MinMax => {
            let (lo, hi) = kept
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.z), b.max(r.z)));
            if !(hi > lo) {
                return Err(Error::Validation("inlier Z-scores have no range to rescale".into()));
            }
            Box::new(move |z| ((z - lo) / (hi - lo) * 100.0).clamp(0.0, 100.0))
        }
        MosScale::FixedZ => Box::new(|z| ((z + 3.0) * 100.0 / 6.0).clamp(0.0, 100.0)),
    };
    let mut per_video: BTreeMap<&str, Vec<f64>> = videos.iter().map(|&v| (v, Vec::new())).collect();
    for r in kept {
        per_video.get_mut(r.video_id.as_str()).expect("video listed").push(map(r.z));
    }
    let rows = per_video
        .into_iter()
        .map(|(video, scores)| {
            if scores.is_empty() {
                return Err(Error::InsufficientData(format!("video {video} has no inlier ratings")));
            }
            Ok(MosRow {
                video_id: video.to_string(),
                mos: scores.iter().sum::<f64>() / scores.len() as f64,
                count: scores.len(),
                std: sample_std(&scores),
            })
        })
        .collect::<Result<_>>()?;
    Ok(MosTable {
        rows,
        inliers: screening.inliers.clone(),
        outliers: screening.outliers.clone(),
    })
}

/// Per-video mean Z over a subject subset, for videos rated in that subset.
fn mean_z(table: &ZScoreTable, subjects: &BTreeSet<&str>) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for r in table.scores.iter().filter(|r| subjects.contains(r.subject_id.as_str())) {
        let e = acc.entry(r.video_id.as_str()).or_default();
        e.0 += r.z;
        e.1 += 1;
    }
    acc.into_iter().map(|(v, (s, n))| (v.to_string(), s / n as f64)).collect()
}

/// Median PLCC between per-video MOS of two random halves of the inliers.
///
/// Trial `t` shuffles with a generator seeded by `seed + t`. The affine
/// rescaling to `[0, 100]` does not change PLCC, so the halves are compared
/// on mean Z-scores. Trials whose correlation is undefined are skipped.
pub fn split_half_consistency(table: &ZScoreTable, inliers: &[String], n_splits: usize, seed: u64) -> Result<f64> {
    if inliers.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "split-half consistency needs at least 4 inlier subjects, got {}",
            inliers.len()
        )));
    }
    if n_splits == 0 {
        return Err(Error::Validation("number of splits must be positive".into()));
    }
    let mut sorted = inliers.to_vec();
    sorted.sort();
    let values: Vec<f64> = (0..n_splits as u64)
        .into_par_iter()
        .filter_map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t));
            let mut order = sorted.clone();
            order.shuffle(&mut rng);
            let half = order.len() / 2;
            let a: BTreeSet<&str> = order[..half].iter().map(String::as_str).collect();
            let b: BTreeSet<&str> = order[half..].iter().map(String::as_str).collect();
            let (ma, mb) = (mean_z(table, &a), mean_z(table, &b));
            let (x, y): (Vec<f64>, Vec<f64>) = ma
                .iter()
                .filter_map(|(v, &za)| mb.get(v).map(|&zb| (za, zb)))
                .unzip();
            if x.len() < 2 {
                return None;
            }
            plcc(&x, &y)
        })
        .collect();
    if values.is_empty() {
        return Err(Error::Numerical("split-half correlation undefined in every trial".into()));
    }
    if values.len() < n_splits {
        log::warn!("{} of {n_splits} split-half trials were undefined", n_splits - values.len());
    }
    Ok(median(&values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn rating(subject: &str, session: u32, video: &str, score: f64) -> Rating {
        Rating {
            subject_id: subject.into(),
            session,
            video_id: video.into(),
            score,
        }
    }

    #[test]
    fn two_point_group_is_plus_minus_one() {
        let t = SubjectScoreTable::new(vec![rating("a", 1, "v1", 40.0), rating("a", 1, "v2", 60.0)]).unwrap();
        let z = zscore(&t, StdDenominator::Population);
        assert_eq!(z.scores.iter().map(|r| r.z).collect::<Vec<_>>(), vec![-1.0, 1.0]);
        let z = zscore(&t, StdDenominator::Sample);
        assert!((z.scores[0].z + 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_groups_are_flagged() {
        let t = SubjectScoreTable::new(vec![
            rating("a", 1, "v1", 50.0),
            rating("a", 1, "v2", 50.0),
            rating("b", 1, "v1", 10.0),
            rating("b", 2, "v2", 10.0),
        ])
        .unwrap();
        let z = zscore(&t, StdDenominator::Population);
        assert!(z.scores.is_empty());
        assert_eq!(z.degenerate.len(), 3);
    }

    #[test]
    fn table_validation() {
        assert!(SubjectScoreTable::new(vec![rating("a", 1, "v", 101.0)]).is_err());
        assert!(SubjectScoreTable::new(vec![rating("a", 1, "v", 1.0), rating("a", 1, "v", 2.0)]).is_err());
        assert!(SubjectScoreTable::new(vec![rating("a", 1, "v", 1.0), rating("a", 2, "v", 2.0)]).is_ok());
    }

    #[test]
    fn csv_round_trip() {
        let text = "subject_id,session,video_id,score\ns1,1,v1,40\ns1, 1 ,v2,60.5\n";
        let t = SubjectScoreTable::from_reader(text.as_bytes()).unwrap();
        assert_eq!(t.ratings()[1], rating("s1", 1, "v2", 60.5));
        assert!(SubjectScoreTable::from_reader("subject_id,session,video_id,score\ns1,x,v1,4\n".as_bytes()).is_err());
    }

    #[test]
    fn groups_are_standardized() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ratings = Vec::new();
        for s in 0..5 {
            for session in 1..=2 {
                for v in 0..12 {
                    ratings.push(rating(&format!("s{s}"), session, &format!("v{v}"), rng.random_range(0.0..100.0)));
                }
            }
        }
        let z = zscore(&SubjectScoreTable::new(ratings).unwrap(), StdDenominator::Population);
        let mut groups: BTreeMap<(String, u32), Vec<f64>> = BTreeMap::new();
        for r in z.scores {
            groups.entry((r.subject_id, r.session)).or_default().push(r.z);
        }
        for g in groups.values() {
            let m = g.iter().sum::<f64>() / g.len() as f64;
            let var = g.iter().map(|v| (v - m).powi(2)).sum::<f64>() / g.len() as f64;
            assert!(m.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn agreeing_panel_has_no_outliers() {
        let ratings = (0..6)
            .flat_map(|s| (0..10).map(move |v| rating(&format!("s{s}"), 1, &format!("v{v}"), (v * 9) as f64)))
            .collect();
        let z = zscore(&SubjectScoreTable::new(ratings).unwrap(), StdDenominator::Population);
        let screening = reject_outliers(&z);
        assert!(screening.outliers.is_empty());
        assert_eq!(screening.inliers.len(), 6);
    }

    #[test]
    fn adversaries_are_rejected() {
        // Honest raters err by ±10 in a checkerboard, so they all share one
        // spread. Each of four adversaries departs from the consensus by 34
        // points on every fourth video, upward on low-quality videos and
        // downward on high-quality ones. The departure lands outside the 2s
        // band while the panel's kurtosis stays inside [2, 4].
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let consensus: Vec<f64> = (0..40).map(|v| 25.0 + 1.3 * v as f64 + rng.random_range(-1.0..1.0)).collect();
        let mut ratings = Vec::new();
        for s in 0..20 {
            for (v, &c) in consensus.iter().enumerate() {
                let score = match s {
                    16..=19 if v % 4 == s - 16 => c + if c < 50.0 { 34.0 } else { -34.0 },
                    _ => c + if (s + v) % 2 == 0 { 10.0 } else { -10.0 },
                };
                ratings.push(rating(&format!("s{s:02}"), 1, &format!("v{v}"), score));
            }
        }
        let z = zscore(&SubjectScoreTable::new(ratings).unwrap(), StdDenominator::Population);
        let screening = reject_outliers(&z);
        assert_eq!(screening.outliers, vec!["s16", "s17", "s18", "s19"]);
    }

    #[test]
    fn mos_endpoints() {
        let z = ZScoreTable {
            scores: vec![
                ZRating { subject_id: "a".into(), session: 1, video_id: "v1".into(), z: -1.0 },
                ZRating { subject_id: "b".into(), session: 1, video_id: "v1".into(), z: -1.0 },
                ZRating { subject_id: "a".into(), session: 1, video_id: "v2".into(), z: 1.0 },
                ZRating { subject_id: "b".into(), session: 1, video_id: "v2".into(), z: 1.0 },
            ],
            degenerate: Vec::new(),
        };
        let screening = Screening { inliers: vec!["a".into(), "b".into()], outliers: Vec::new() };
        let mos = compute_mos(&z, &screening, MosScale::MinMax).unwrap();
        assert_eq!(mos.get("v1").unwrap().mos, 0.0);
        assert_eq!(mos.get("v2").unwrap().mos, 100.0);
        assert_eq!(mos.get("v2").unwrap().count, 2);
        let fixed = compute_mos(&z, &screening, MosScale::FixedZ).unwrap();
        assert!((fixed.get("v1").unwrap().mos - 100.0 / 3.0).abs() < 1e-12);

        let mut buf = Vec::new();
        mos.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("video_id,mos,count,std\nv1,0.0,2,0.0\n"));
    }

    #[test]
    fn mos_errors() {
        let z = ZScoreTable {
            scores: vec![
                ZRating { subject_id: "a".into(), session: 1, video_id: "v1".into(), z: 0.5 },
                ZRating { subject_id: "b".into(), session: 1, video_id: "v2".into(), z: 0.5 },
            ],
            degenerate: Vec::new(),
        };
        let both = Screening { inliers: vec!["a".into(), "b".into()], outliers: Vec::new() };
        assert!(compute_mos(&z, &both, MosScale::MinMax).is_err());
        let only_a = Screening { inliers: vec!["a".into()], outliers: vec!["b".into()] };
        assert!(compute_mos(&z, &only_a, MosScale::FixedZ).is_err());
    }

    fn panel(noise: f64, seed: u64) -> (ZScoreTable, Vec<String>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let truth: Vec<f64> = (0..50).map(|_| rng.random_range(20.0..80.0)).collect();
        let mut ratings = Vec::new();
        for s in 0..12 {
            for (v, &t) in truth.iter().enumerate() {
                let score = if noise.is_finite() {
                    t + noise * normal.sample(&mut rng)
                } else {
                    rng.random_range(0.0..100.0)
                };
                ratings.push(rating(&format!("s{s}"), 1, &format!("v{v}"), score.clamp(0.0, 100.0)));
            }
        }
        let z = zscore(&SubjectScoreTable::new(ratings).unwrap(), StdDenominator::Population);
        let subjects = z.subjects().into_iter().map(String::from).collect();
        (z, subjects)
    }

    #[test]
    fn split_half_limits() {
        let (z, subjects) = panel(1e-6, 1);
        assert!(split_half_consistency(&z, &subjects, 25, 0).unwrap() > 1.0 - 1e-9);
        let (z, subjects) = panel(f64::INFINITY, 2);
        assert!(split_half_consistency(&z, &subjects, 25, 0).unwrap().abs() < 0.3);
        assert!(split_half_consistency(&z, &subjects[..3], 5, 0).is_err());
    }

    #[test]
    fn split_half_is_deterministic() {
        let (z, subjects) = panel(10.0, 4);
        let a = split_half_consistency(&z, &subjects, 20, 7).unwrap();
        let b = split_half_consistency(&z, &subjects, 20, 7).unwrap();
        assert_eq!(a, b);
    }
}
