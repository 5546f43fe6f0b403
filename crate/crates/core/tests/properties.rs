mod common;

use common::{at, random_model};
use proptest::prelude::*;
use sbn_core::evaluator::nrmse;
use sbn_core::features::{residual_lags, FeatureTable, Normalizer};
use sbn_core::io::{ingest_reader, write_series, IngestOptions};
use sbn_core::model::{ModelConfig, SamplePlan, StageSpec, Tracks};
use sbn_core::nn::Rng;
use sbn_core::{HourlySeries, StageKind};

fn kind() -> impl Strategy<Value = StageKind> {
    prop_oneof![Just(StageKind::Weekly), Just(StageKind::Daily), Just(StageKind::Hourly)]
}

proptest! {
    #[test]
    fn normalizer_round_trips(
        mean in -100.0..100.0f64,
        std in 0.1..50.0f64,
        x in -1e3..1e3f64,
    ) {
        let n = Normalizer { temp_mean: mean, temp_std: std, energy_mean: mean, energy_std: std };
        prop_assert!((n.energy_inverse(n.energy(x)) - x).abs() <= 1e-9 * x.abs().max(1.0));
        prop_assert!((n.temp_inverse(n.temp(x)) - x).abs() <= 1e-9 * x.abs().max(1.0));
    }

    #[test]
    fn residual_lags_are_increasing_and_periodic(k in kind(), n in 1usize..30, t in 0usize..20_000) {
        let p = k.period_hours();
        match residual_lags(k, t, n) {
            Some(lags) => {
                prop_assert_eq!(lags.len(), n);
                prop_assert!(lags.windows(2).all(|w| w[1] == w[0] + p));
                prop_assert_eq!(*lags.last().unwrap() + p, t);
            }
            None => prop_assert!(t < p * n),
        }
    }

    #[test]
    fn nrmse_is_shift_and_scale_invariant(
        pairs in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 2..60),
        shift in -1e3..1e3f64,
        scale in 0.01..100.0f64,
    ) {
        let pred: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let actual: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let range = actual.iter().cloned().fold(f64::MIN, f64::max) - actual.iter().cloned().fold(f64::MAX, f64::min);
        prop_assume!(range > 1e-3);
        let base = nrmse(&pred, &actual).unwrap();
        let moved = |v: &[f64]| v.iter().map(|x| scale * x + shift).collect::<Vec<_>>();
        let other = nrmse(&moved(&pred), &moved(&actual)).unwrap();
        prop_assert!((base - other).abs() <= 1e-9 * base.max(1.0));
    }

    #[test]
    fn ingest_write_ingest_is_idempotent(
        rows in prop::collection::vec((1i64..12, -20.0..40.0f64, 0.0..200.0f64), 1..120),
    ) {
        let mut csv = String::from("timestamp,energy_kwh,temperature_c\n");
        let mut ts = at(2019, 3, 1, 0);
        for (step, temp, energy) in &rows {
            csv.push_str(&format!("{},{energy},{temp}\n", ts.format("%Y-%m-%dT%H:%M:%S")));
            ts += chrono::Duration::hours(*step);
        }
        let (first, _) = ingest_reader(csv.as_bytes(), IngestOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_series(&first, &mut buf).unwrap();
        let (second, summary) = ingest_reader(buf.as_slice(), IngestOptions::default()).unwrap();
        prop_assert_eq!(summary.hours_interpolated, 0);
        let mut again = Vec::new();
        write_series(&second, &mut again).unwrap();
        prop_assert_eq!(buf, again);
    }

    #[test]
    fn shuffle_is_a_permutation(n in 0usize..500, seed in any::<u64>()) {
        let mut v: Vec<usize> = (0..n).collect();
        Rng::new(seed).shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn plan_depth_is_sum_of_windows(weekly in 0usize..4, daily in 0usize..8, hourly in 0usize..25) {
        let mut stages = Vec::new();
        for (k, n) in [(StageKind::Weekly, weekly), (StageKind::Daily, daily), (StageKind::Hourly, hourly)] {
            if n > 0 {
                stages.push(StageSpec { kind: k, n_inputs: n });
            }
        }
        let cfg = ModelConfig { stages, ..ModelConfig::instant_only() };
        let plan = SamplePlan::new(&cfg);
        prop_assert_eq!(plan.lag_depth(), 168 * weekly + 24 * daily + hourly);
        prop_assert_eq!(cfg.required_history(), plan.lag_depth() + 12);
        prop_assert_eq!(plan.offsets()[0], 0);
    }
}

#[test]
fn weight_sharing_gives_equal_estimates_for_equal_windows() {
    // A week-periodic series feeds every stage identical windows one week apart.
    let n = 1400;
    let energy: Vec<f64> = (0..n).map(|i| 50.0 + ((i % 168) as f64 * 0.37).sin() * 9.0).collect();
    let temp: Vec<f64> = (0..n).map(|i| ((i % 168) as f64 * 0.11).cos() * 6.0).collect();
    let series = HourlySeries::fully_valid(at(2020, 1, 6, 0), energy, temp).unwrap();
    let model = random_model(&series, ModelConfig::from_boosters(&StageKind::ALL).unwrap(), 3);
    let table = FeatureTable::build(&series, &model.normalizer);
    let tracks = Tracks::historical(&model, &table).unwrap();
    let mut checked = 0;
    for t in model.config().required_history()..n - 168 {
        for s in 1..=3 {
            let (a, b) = (tracks.estimate(s, t).unwrap(), tracks.estimate(s, t + 168).unwrap());
            assert_eq!(a.to_bits(), b.to_bits(), "stage {s} at {t}");
            checked += 1;
        }
    }
    assert!(checked > 1000);
}
