use approx::assert_abs_diff_eq;
use proptest::collection::vec;
use proptest::prelude::*;

use pvqa_core::eval::make_splits;
use pvqa_core::mcs::{cosine_similarity, mcs_frame_features};
use pvqa_core::model::{decode_model, encode_model};
use pvqa_core::stats::{distance_correlation, pca_fit, plcc, srocc, DMatrix};
use pvqa_core::subjective::{compute_mos, reject_outliers, zscore, MosScale, Rating, StdDenominator, SubjectScoreTable};
use pvqa_core::{
    motion_compensate, pvqf, rescaled_frame_difference, train_on_table, BackboneSpec, FeatureConfig, FeatureMap,
    FeatureSet, FeatureTable, Frame,
};

fn feature_map(h: usize, w: usize, k: usize) -> impl Strategy<Value = FeatureMap> {
    vec(-4.0f32..4.0, h * w * k).prop_map(move |v| FeatureMap::new(h, w, k, v).unwrap())
}

fn frame(h: usize, w: usize) -> impl Strategy<Value = Frame> {
    vec(any::<u8>(), h * w * 3).prop_map(move |s| Frame::new(h, w, s).unwrap())
}

fn paired(len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (vec(-100.0f64..100.0, len), vec(-100.0f64..100.0, len))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cosine_is_bounded(p in vec(-10.0f64..10.0, 1..40), seed in vec(-10.0f64..10.0, 40)) {
        let q = &seed[..p.len()];
        let s = cosine_similarity(&p, q).unwrap();
        prop_assert!((-1.0..=1.0).contains(&s));
    }

    #[test]
    fn mcs_features_are_bounded(a in feature_map(3, 4, 5), b in feature_map(3, 4, 5)) {
        for s in mcs_frame_features(&a, &b).unwrap() {
            prop_assert!((-1.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn motion_search_prefers_an_exact_copy(a in feature_map(3, 3, 4), b in feature_map(3, 3, 4)) {
        // Every context vector also appears in the predicted map, so the best match is perfect.
        let field = motion_compensate(&a, &a).unwrap();
        for (cell, &s) in field.similarities().iter().enumerate() {
            if a.cell(cell).iter().any(|&v| v != 0.0) {
                prop_assert!((s - 1.0).abs() < 1e-9);
            }
        }
        let cross = motion_compensate(&a, &b).unwrap();
        prop_assert!(cross.similarities().iter().all(|s| (-1.0..=1.0 + 1e-12).contains(s)));
    }

    #[test]
    fn rfd_stretches_each_channel(a in frame(5, 6), b in frame(5, 6)) {
        let rfd = rescaled_frame_difference(&a, &b).unwrap();
        for ch in 0..3 {
            let diffs: Vec<i16> = (0..5 * 6)
                .map(|p| b.samples()[p * 3 + ch] as i16 - a.samples()[p * 3 + ch] as i16)
                .collect();
            let out: Vec<u8> = (0..5 * 6).map(|p| rfd.samples()[p * 3 + ch]).collect();
            if diffs.iter().all(|&d| d == diffs[0]) {
                prop_assert!(out.iter().all(|&v| v == 0));
                continue;
            }
            prop_assert_eq!(out.iter().min(), Some(&0));
            prop_assert_eq!(out.iter().max(), Some(&255));
            for i in 0..diffs.len() {
                for j in 0..diffs.len() {
                    if diffs[i] < diffs[j] {
                        prop_assert!(out[i] <= out[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn rfd_reversal_mirrors_the_scale(a in frame(4, 5), b in frame(4, 5)) {
        // Swapping the frames negates the difference; values mirror around 127.5 except at exact halves.
        let forward = rescaled_frame_difference(&a, &b).unwrap();
        let backward = rescaled_frame_difference(&b, &a).unwrap();
        for (idx, (&f, &r)) in forward.samples().iter().zip(backward.samples()).enumerate() {
            let sum = f as u16 + r as u16;
            let ch = idx % 3;
            let constant = forward.samples().iter().skip(ch).step_by(3).all(|&v| v == 0);
            let mirrored = if constant { sum == 0 } else { sum == 255 || sum == 256 };
            prop_assert!(mirrored, "sample {} sums to {}", idx, sum);
        }
    }

    #[test]
    fn srocc_ignores_monotone_transforms((x, y) in paired(12)) {
        let warped: Vec<f64> = x.iter().map(|v| v.powi(3) + 2.0 * v).collect();
        match (srocc(&x, &y), srocc(&warped, &y)) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
            (a, b) => prop_assert_eq!(a.is_none(), b.is_none()),
        }
    }

    #[test]
    fn plcc_ignores_positive_affine_maps((x, y) in paired(10), scale in 0.1f64..10.0, shift in -50.0f64..50.0) {
        let mapped: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
        if let (Some(a), Some(b)) = (plcc(&x, &y), plcc(&mapped, &y)) {
            prop_assert!((-1.0..=1.0).contains(&a));
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn distance_correlation_is_bounded(xs in vec(-5.0f64..5.0, 16), ys in vec(-5.0f64..5.0, 16)) {
        let x = DMatrix::from_vec(8, 2, xs);
        let y = DMatrix::from_vec(8, 2, ys);
        let d = distance_correlation(&x, &y).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&d));
    }

    #[test]
    fn pca_basis_is_orthonormal(values in vec(-3.0f64..3.0, 9 * 6), k in 1usize..12) {
        let x = DMatrix::from_vec(9, 6, values);
        let model = pca_fit(&x, k).unwrap();
        prop_assert!(model.k_prime() <= k.min(8));
        let gram = model.basis().transpose() * model.basis();
        for i in 0..model.k_prime() {
            for j in 0..model.k_prime() {
                let expected = if i == j { 1.0 } else { 0.0 };
                prop_assert!((gram[(i, j)] - expected).abs() < 1e-9);
            }
        }
        prop_assert!(model.explained_variance().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn pvqf_round_trips_bit_exact(maps in vec(feature_map(2, 3, 4), 0..5)) {
        let decoded = pvqf::decode(&pvqf::encode(&maps).unwrap()).unwrap();
        prop_assert_eq!(decoded, maps);
    }

    #[test]
    fn zscores_ignore_per_subject_affine_maps(
        scores in vec(vec(0.0f64..100.0, 6), 3),
        scales in vec(0.2f64..1.0, 3),
        offsets in vec(0.0f64..1.0, 3),
    ) {
        // Shifts keep mapped ratings on the 0..100 scale.
        let shifts: Vec<f64> = scales.iter().zip(&offsets).map(|(a, o)| o * 100.0 * (1.0 - a)).collect();
        let (scales, shifts) = (&scales, &shifts);
        let ratings = |mapped: bool| -> Vec<Rating> {
            scores.iter().enumerate().flat_map(|(s, row)| {
                row.iter().enumerate().map(move |(v, &x)| Rating {
                    subject_id: format!("s{s}"),
                    session: 0,
                    video_id: format!("v{v}"),
                    score: if mapped { scales[s] * x + shifts[s] } else { x },
                })
            }).collect()
        };
        let plain = zscore(&SubjectScoreTable::new(ratings(false)).unwrap(), StdDenominator::Population);
        let mapped = zscore(&SubjectScoreTable::new(ratings(true)).unwrap(), StdDenominator::Population);
        prop_assert_eq!(plain.scores.len(), mapped.scores.len());
        for (p, m) in plain.scores.iter().zip(&mapped.scores) {
            prop_assert_eq!(&p.video_id, &m.video_id);
            prop_assert!((p.z - m.z).abs() < 1e-8);
        }
    }

    #[test]
    fn mos_stays_on_the_scale(scores in vec(vec(0.0f64..100.0, 8), 4)) {
        let ratings: Vec<Rating> = scores.iter().enumerate().flat_map(|(s, row)| {
            row.iter().enumerate().map(move |(v, &x)| Rating {
                subject_id: format!("s{s}"),
                session: 0,
                video_id: format!("v{v}"),
                score: x,
            })
        }).collect();
        let z = zscore(&SubjectScoreTable::new(ratings).unwrap(), StdDenominator::Population);
        let screening = reject_outliers(&z);
        for scale in [MosScale::MinMax, MosScale::FixedZ] {
            if let Ok(mos) = compute_mos(&z, &screening, scale) {
                prop_assert!(mos.rows.iter().all(|r| (0.0..=100.0).contains(&r.mos)));
            }
        }
    }

    #[test]
    fn splits_partition_the_ids(n in 5usize..40, seed in any::<u64>(), fraction in 0.05f64..0.95) {
        let ids: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
        let plan = make_splits(&ids, seed, 3, fraction).unwrap();
        for trial in &plan.trials {
            let mut all: Vec<&String> = trial.train.iter().chain(&trial.test).collect();
            all.sort();
            all.dedup();
            prop_assert_eq!(all.len(), n);
            prop_assert!(!trial.train.is_empty() && !trial.test.is_empty());
        }
        prop_assert_eq!(plan, make_splits(&ids, seed, 3, fraction).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn model_encoding_round_trips(rows in vec(vec(-1.0f32..1.0, 2 * 3), 6), mos in vec(0.0f64..100.0, 6), k in 1usize..8) {
        // Ssa over one context and one predicted frame with k = 3 channels gives 6 values per video.
        let config = FeatureConfig { n_context: 1, n_predicted: 1, feature_set: FeatureSet::Ssa };
        let ids: Vec<String> = (0..6).map(|i| format!("v{i}")).collect();
        let table = FeatureTable::from_rows(
            ids,
            rows,
            mos.into_iter().map(Some).collect(),
            config,
            BackboneSpec::synthetic(3),
        ).unwrap();
        let model = train_on_table(&table, &[0, 1, 2, 3, 4, 5], k).unwrap();
        prop_assert_eq!(decode_model(&encode_model(&model).unwrap()).unwrap(), model);
    }
}
