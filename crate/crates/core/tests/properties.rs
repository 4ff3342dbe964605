use proptest::prelude::*;

use residual_screen::aggregate::Breakdowns;
use residual_screen::classify::{classify_all, reach, runs, Category, MagnitudeBand, Reach};
use residual_screen::ingest::{AlignedPanel, AlignedSeries, Buildings, PanelCell};
use residual_screen::metrics::{daily_errors, rmsle, scale_records, DailyErrorRecord, PoolingMode};
use residual_screen::oracle::random_fleet;
use residual_screen::{AnalysisConfig, BuildingRef, DayIndex, DayRange, MeterKind, ReachFraction};

fn day0() -> DayIndex {
    DayIndex::from_ymd(2017, 1, 1).unwrap()
}

fn unscaled(values: &[(u8, f64)]) -> Vec<DailyErrorRecord> {
    values
        .iter()
        .enumerate()
        .map(|(i, &(k, v))| DailyErrorRecord {
            building: BuildingRef::new(i as u32, 0, "Office"),
            kind: MeterKind::from_code(k % 4).unwrap(),
            day: day0(),
            rmsle: v,
            rmsle_scaled: None,
            pair_count: 24,
        })
        .collect()
}

fn band_seq() -> impl Strategy<Value = Vec<Option<MagnitudeBand>>> {
    prop::collection::vec(
        prop_oneof![
            Just(None),
            Just(Some(MagnitudeBand::GoodFit)),
            Just(Some(MagnitudeBand::InRange)),
            Just(Some(MagnitudeBand::OutOfRange)),
        ],
        0..80,
    )
}

fn error_days(cfg: &AnalysisConfig, seed: u64) -> usize {
    let f = random_fleet(seed, 12, 60);
    classify_all(&f.records, &f.buildings, cfg, &f.period)
        .unwrap()
        .iter()
        .filter(|l| l.tb.is_some())
        .count()
}

proptest! {
    #[test]
    fn scaled_values_lie_in_unit_interval(values in prop::collection::vec((0u8..4, 0.0f64..5.0), 1..60)) {
        let mut records = unscaled(&values);
        let lonely = (0..4u8).any(|k| values.iter().filter(|v| v.0 % 4 == k).count() == 1);
        let fitted = scale_records(&mut records);
        prop_assert_eq!(fitted.is_err(), lonely);
        let Ok(scalers) = fitted else { return Ok(()) };
        for r in &records {
            let s = r.rmsle_scaled.unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
        }
        for p in &scalers {
            let of_kind: Vec<f64> = records.iter().filter(|r| r.kind == p.kind).map(|r| r.rmsle_scaled.unwrap()).collect();
            if !p.is_degenerate() {
                prop_assert!(of_kind.contains(&0.0) && of_kind.contains(&1.0));
            } else {
                prop_assert!(of_kind.iter().all(|&s| s == 0.0));
            }
        }
    }

    #[test]
    fn rmsle_is_symmetric(pairs in prop::collection::vec((0.0f64..1e3, 0.0f64..1e3), 1..40)) {
        let swapped: Vec<(f64, f64)> = pairs.iter().map(|&(p, a)| (a, p)).collect();
        let (x, y) = (rmsle(&pairs).unwrap(), rmsle(&swapped).unwrap());
        prop_assert!((x - y).abs() <= 1e-12 * x.max(1.0));
    }

    #[test]
    fn classification_ignores_record_order(seed in any::<u64>(), rot in 0usize..1000) {
        let f = random_fleet(seed, 10, 50);
        let want = classify_all(&f.records, &f.buildings, &f.config, &f.period).unwrap();
        let mut shuffled = f.records.clone();
        shuffled.reverse();
        if !shuffled.is_empty() {
            let n = rot % shuffled.len();
            shuffled.rotate_left(n);
        }
        prop_assert_eq!(classify_all(&shuffled, &f.buildings, &f.config, &f.period).unwrap(), want);
    }

    #[test]
    fn every_breakdown_sums_to_one(seed in any::<u64>()) {
        let f = random_fleet(seed, 15, 80);
        let labels = classify_all(&f.records, &f.buildings, &f.config, &f.period).unwrap();
        let b = Breakdowns::compute(&labels, &f.buildings).unwrap();
        for t in b.tables().chain(&b.meter_joint).filter(|t| t.n_days > 0) {
            let freq: f64 = t.rows.iter().map(|r| r.frequency_share).sum();
            let contrib: f64 = t.rows.iter().map(|r| r.contribution_share).sum();
            prop_assert!((freq - 1.0).abs() < 1e-9, "{} {} frequency {}", t.grouping.as_str(), t.key, freq);
            prop_assert!((contrib - 1.0).abs() < 1e-9, "{} {} contribution {}", t.grouping.as_str(), t.key, contrib);
        }
    }

    #[test]
    fn lower_good_fit_threshold_never_removes_error_days(seed in any::<u64>(), gf in 0.01f64..0.1) {
        let base = AnalysisConfig::default();
        let strict = AnalysisConfig { good_fit_max: gf, ..base };
        prop_assert!(error_days(&strict, seed) >= error_days(&base, seed));
    }

    #[test]
    fn runs_partition_error_days(bands in band_seq()) {
        let found = runs(day0(), &bands);
        let errors = bands.iter().flatten().filter(|b| b.is_error()).count();
        prop_assert_eq!(found.iter().map(|r| r.length as usize).sum::<usize>(), errors);
        let mut last_end = 0i64;
        for r in &found {
            let start = r.start.days_since(day0());
            prop_assert!(start >= last_end);
            for d in start..start + i64::from(r.length) {
                prop_assert_eq!(bands[d as usize], Some(r.band));
            }
            let end = start + i64::from(r.length);
            prop_assert!(end as usize == bands.len() || bands[end as usize] != Some(r.band));
            prop_assert!(start == 0 || bands[start as usize - 1] != Some(r.band));
            last_end = end;
        }
    }

    #[test]
    fn reach_is_exact_rational(n in 1u64..50, extra in 0u64..50, affected in 0usize..60, population in 1usize..60) {
        let d = n + extra;
        let cfg = AnalysisConfig { reach_fraction: ReachFraction::new(n, d).unwrap(), ..AnalysisConfig::default() };
        let affected = affected.min(population);
        let want = affected >= 2 && (affected as u64) * d >= n * population as u64;
        let got = reach(affected, population, &cfg).unwrap() == Reach::Multiple;
        prop_assert_eq!(got, want);
    }

    #[test]
    fn sites_are_classified_independently(seed in any::<u64>()) {
        let f = random_fleet(seed, 16, 60);
        let all = classify_all(&f.records, &f.buildings, &f.config, &f.period).unwrap();
        let sites: std::collections::BTreeSet<_> = f.buildings.iter().map(|b| b.site_id).collect();
        for site in sites {
            let records: Vec<_> = f.records.iter().filter(|r| r.building.site_id == site).cloned().collect();
            let buildings: Buildings = f.buildings.iter().filter(|b| b.site_id == site).cloned().collect();
            let alone = classify_all(&records, &buildings, &f.config, &f.period).unwrap();
            let subset: Vec<_> = all.iter().filter(|l| l.building.site_id == site).cloned().collect();
            prop_assert_eq!(alone, subset);
        }
    }

    #[test]
    fn pooling_modes_agree_for_one_submission(
        values in prop::collection::vec((0.0f64..500.0, prop::option::of(0.0f64..500.0)), 48),
    ) {
        let day = day0();
        let period = DayRange::new(day, day.succ()).unwrap();
        let hours = residual_screen::ingest::period_hours(&period);
        let panel = AlignedPanel {
            period,
            submission_ids: vec!["only".into()],
            series: vec![AlignedSeries {
                building_id: residual_screen::BuildingId(1),
                kind: MeterKind::Steam,
                cells: hours
                    .iter()
                    .zip(&values)
                    .map(|(&hour, &(actual, p))| PanelCell { hour, actual: Some(actual), predictions: vec![p] })
                    .collect(),
            }],
        };
        let buildings: Buildings = [BuildingRef::new(1, 0, "Office")].into_iter().collect();
        let pooled = daily_errors(&panel, &buildings, PoolingMode::Pooled).unwrap();
        let mean = daily_errors(&panel, &buildings, PoolingMode::MeanOfSubmissions).unwrap();
        prop_assert_eq!(pooled.len(), mean.len());
        for (a, b) in pooled.iter().zip(&mean) {
            prop_assert!((a.rmsle - b.rmsle).abs() <= 1e-12);
            prop_assert_eq!(a.pair_count, b.pair_count);
        }
    }
}

#[test]
fn category_codes_round_trip() {
    for c in Category::all() {
        assert_eq!(c.code().parse::<Category>(), Ok(c));
        assert_eq!(Category::new(c.mr(), c.tb()), Some(c));
    }
    assert_eq!(Category::all().count(), 17);
}
