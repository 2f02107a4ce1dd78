use std::collections::BTreeSet;

use fadkit_core::embedding::{
    generate_frames, generate_synthetic, EmbeddingFrameSet, Frames, SyntheticSpec,
};
use fadkit_core::estimators::{
    fad_infinity, fad_set, outlier_report, per_song_scores, select_extremes, BootstrapPool,
    BootstrapUnit, FadInfConfig, SongFlag, SongRow, SongScoreTable,
};
use fadkit_core::eval::{pearson, prf, Truth};
use fadkit_core::stats::GaussianStats;
use fadkit_core::FadError;
use proptest::prelude::*;

fn table(scores: &[f64]) -> SongScoreTable {
    SongScoreTable::from_rows(
        "ref",
        scores
            .iter()
            .enumerate()
            .map(|(i, &fad)| SongRow {
                song_id: format!("s{i:03}"),
                fad: Some(fad),
                n_frames: 10,
                rank: None,
                flags: BTreeSet::new(),
            })
            .collect(),
    )
    .unwrap()
}

fn reference(dim: usize) -> GaussianStats {
    GaussianStats::fit(&generate_frames(&SyntheticSpec::standard(dim, 10_000, 77)).unwrap())
}

fn song(id: &str, dim: usize, n: usize, seed: u64) -> EmbeddingFrameSet {
    let mut s = generate_synthetic(&SyntheticSpec::standard(dim, n, seed)).unwrap();
    s.song_id = id.to_string();
    s
}

proptest! {
    #[test]
    fn ranks_follow_scores(scores in prop::collection::vec(0.0f64..100.0, 2..80)) {
        let t = table(&scores);
        let ordered: Vec<f64> = t.scored().map(|r| r.fad.unwrap()).collect();
        prop_assert!(ordered.windows(2).all(|w| w[0] <= w[1]));
        let ranks: Vec<usize> = t.scored().map(|r| r.rank.unwrap()).collect();
        prop_assert_eq!(ranks, (1..=scores.len()).collect::<Vec<_>>());
        // a CSV round trip preserves every value bit for bit
        let text = t.to_csv_string().unwrap();
        let back = SongScoreTable::read_csv(text.as_bytes(), "ref").unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn extremes_are_disjoint_and_ordered(scores in prop::collection::vec(0.0f64..100.0, 4..200), fraction in 0.01f64..0.25) {
        let t = table(&scores);
        let ex = select_extremes(&t, fraction).unwrap();
        let top: BTreeSet<_> = ex.top.iter().collect();
        prop_assert!(ex.bottom.iter().all(|id| !top.contains(id)));
        let worst_bottom = ex.bottom.last().map(|id| t.get(id).unwrap().fad.unwrap());
        let best_top = ex.top.last().map(|id| t.get(id).unwrap().fad.unwrap());
        if let (Some(b), Some(tp)) = (worst_bottom, best_top) {
            prop_assert!(b <= tp);
        }
    }

    #[test]
    fn prf_ignores_song_order(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..60), rot in 0usize..60) {
        let n = pairs.len();
        let pred: Truth = pairs.iter().enumerate().map(|(i, p)| (format!("k{i:02}"), p.0)).collect();
        let truth: Truth = pairs.iter().enumerate().map(|(i, p)| (format!("k{i:02}"), p.1)).collect();
        // relabel songs with a rotation so the map order changes but pairs stay together
        let relabel = |m: &Truth| -> Truth {
            m.iter().enumerate().map(|(i, (_, &v))| (format!("k{:02}", (i + rot) % n), v)).collect()
        };
        let a = prf(&pred, &truth).unwrap();
        let b = prf(&relabel(&pred), &relabel(&truth)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn pearson_is_bounded_and_symmetric(xy in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 3..100)) {
        let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
        if let Some(r) = pearson(&x, &y) {
            prop_assert!((-1.0..=1.0).contains(&r));
            prop_assert!((r - pearson(&y, &x).unwrap()).abs() < 1e-12);
        }
    }
}

#[test]
fn per_song_scores_flag_short_songs() {
    let dim = 4;
    let songs = vec![
        song("normal", dim, 400, 1),
        song("short", dim, 3, 2),
        EmbeddingFrameSet::new(
            fadkit_core::embedding::EmbeddingModelInfo::synthetic(dim),
            "single",
            Frames::zeros(1, dim),
        )
        .unwrap(),
    ];
    let t = per_song_scores(&reference(dim), &songs, "ref").unwrap();
    assert_eq!(t.scored_len(), 2);
    assert!(t.get("single").unwrap().flags.contains(&SongFlag::Skipped));
    assert!(t.get("single").unwrap().rank.is_none());
    assert!(t
        .get("short")
        .unwrap()
        .flags
        .contains(&SongFlag::RankDeficient));
    assert_eq!(t.get("normal").unwrap().rank, Some(1));
    let csv = t.to_csv_string().unwrap();
    assert!(csv.starts_with("song_id,fad,n_frames,rank,flags\n"));
    assert!(csv.contains("single,,1,,skipped"));
}

#[test]
fn set_fad_shrinks_with_more_songs() {
    let dim = 4;
    let r = reference(dim);
    let few: Vec<_> = (0..2).map(|i| song(&format!("a{i}"), dim, 60, i)).collect();
    let many: Vec<_> = (0..40)
        .map(|i| song(&format!("a{i}"), dim, 60, i))
        .collect();
    let small = fad_set(&r, &few).unwrap();
    let large = fad_set(&r, &many).unwrap();
    assert_eq!(large.n_songs, 40);
    assert!(large.score.value < small.score.value);
}

#[test]
fn song_bootstrap_runs_and_is_seeded() {
    let dim = 3;
    let r = reference(dim);
    let songs: Vec<_> = (0..30)
        .map(|i| song(&format!("t{i:02}"), dim, 40, 100 + i))
        .collect();
    let pool = BootstrapPool::songs_of(&songs).unwrap();
    let config = FadInfConfig {
        sizes: Some(vec![4, 8, 16, 30]),
        unit: BootstrapUnit::Song,
        ..FadInfConfig::default()
    };
    let a = fad_infinity(&r, &pool, &config).unwrap();
    let b = fad_infinity(&r, &pool, &config).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.points.len(), 4);
    let other = fad_infinity(
        &r,
        &pool,
        &FadInfConfig {
            seed: 7,
            ..config.clone()
        },
    )
    .unwrap();
    assert_ne!(a.points, other.points);
}

#[test]
fn bootstrap_rejects_bad_grids() {
    let dim = 3;
    let r = reference(dim);
    let songs = vec![song("x", dim, 500, 5)];
    let pool = BootstrapPool::frames_of(&songs).unwrap();
    let one = FadInfConfig {
        sizes: Some(vec![100, 100]),
        ..FadInfConfig::default()
    };
    assert!(matches!(
        fad_infinity(&r, &pool, &one),
        Err(FadError::TooFewSizes(1))
    ));
    let huge = FadInfConfig {
        sizes: Some(vec![100, 10_000]),
        ..FadInfConfig::default()
    };
    assert!(matches!(
        fad_infinity(&r, &pool, &huge),
        Err(FadError::SizeOutOfRange { .. })
    ));
}

#[test]
fn outlier_report_bounds() {
    let t = table(&[5.0, 1.0, 3.0, 2.0, 4.0]);
    let rep = outlier_report(&t, 2).unwrap();
    assert_eq!(rep.highest.len(), 2);
    assert_eq!(rep.lowest.len(), 2);
    let back = fadkit_core::estimators::OutlierReport::from_json(&rep.to_json().unwrap()).unwrap();
    assert_eq!(back, rep);
    assert!(outlier_report(&t, 3).is_err());
    assert!(outlier_report(&t, 0).is_err());
}

#[test]
fn sensitivity_ratios_match_direct_quotients() {
    use fadkit_core::eval::sensitivity_normalize;
    use fadkit_core::stats::frechet_distance;
    use nalgebra::{DMatrix, DVector};
    use std::collections::BTreeMap;

    let dim = 3;
    let r = reference(dim);
    let fit_shifted = |shift: f64, seed: u64| {
        let spec = SyntheticSpec::from_moments(
            &DVector::from_element(dim, shift),
            &DMatrix::identity(dim, dim),
            4000,
            seed,
        );
        GaussianStats::fit(&generate_frames(&spec).unwrap())
    };
    let clean = frechet_distance(&r, &fit_shifted(0.2, 1)).unwrap();
    let names = ["distortion", "low-pass", "reverb", "pitch-down", "pitch-up"];
    let effected: BTreeMap<String, _> = names
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let shift = 0.3 + 0.2 * i as f64;
            (
                n.to_string(),
                frechet_distance(&r, &fit_shifted(shift, 10 + i as u64)).unwrap(),
            )
        })
        .collect();
    let rel = sensitivity_normalize(&clean, &effected).unwrap();
    assert!(rel.normalized);
    for n in names {
        let want = effected[n].value / clean.value;
        assert!((rel.values[n] - want).abs() <= 1e-9 * want);
    }
    let same: BTreeMap<String, _> = names
        .iter()
        .map(|n| (n.to_string(), clean.clone()))
        .collect();
    let unit = sensitivity_normalize(&clean, &same).unwrap();
    assert!(unit.values.values().all(|&v| v == 1.0));
}
