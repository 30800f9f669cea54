use std::collections::HashMap;

use chrono::{Duration, NaiveDateTime};
use edlab_core::data::{
    default_start, lagged_samples, make_samples, read_csv, synth, write_csv, LoadSeries, SplitSpec, SynthSpec,
    LAGS, N_FEATURES,
};
use edlab_core::dist::DemandDistribution;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Hourly series with occasional gaps whose load encodes the hour offset, so
/// every feature value identifies its own timestamp.
fn gappy_series(hours: usize, seed: u64) -> LoadSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = default_start();
    let mut timestamps = Vec::new();
    for _ in 0..hours {
        timestamps.push(t);
        t += Duration::hours(if rng.gen_bool(0.01) { rng.gen_range(2..30) } else { 1 });
    }
    let total_load = timestamps.iter().map(|x| (*x - default_start()).num_hours() as f64).collect();
    LoadSeries {
        timestamps,
        total_load,
        bus_loads: None,
        gaps_flagged: true,
    }
}

#[test]
fn features_strictly_precede_targets() {
    for seed in 0..5 {
        let series = gappy_series(5000, seed);
        let when: HashMap<u64, NaiveDateTime> = series
            .total_load
            .iter()
            .zip(&series.timestamps)
            .map(|(v, t)| (*v as u64, *t))
            .collect();
        let samples = lagged_samples(&series);
        assert!(!samples.is_empty());
        for s in &samples {
            assert_eq!(s.features.len(), N_FEATURES);
            let latest = s.features[..LAGS].iter().map(|v| when[&(*v as u64)]).max().unwrap();
            assert!(latest < s.timestamp);
            assert_eq!(s.timestamp - latest, Duration::hours(1));
        }
    }
}

#[test]
fn splits_are_chronological_and_disjoint() {
    let series = synth(&SynthSpec {
        family: DemandDistribution::normal(2.0, 0.1).unwrap(),
        hours: 40 * 24,
        seed: 2,
        start: None,
        diurnal: None,
    })
    .unwrap();
    let split = make_samples(&series, SplitSpec { train_days: 25, val_days: 5, test_days: 10 }).unwrap();
    assert_eq!(split.train.len(), 25 * 24 - 24);
    assert_eq!(split.val.len(), 5 * 24);
    assert_eq!(split.test.len(), 10 * 24);
    let last = |v: &[edlab_core::data::Sample]| v.iter().map(|s| s.timestamp).max().unwrap();
    let first = |v: &[edlab_core::data::Sample]| v.iter().map(|s| s.timestamp).min().unwrap();
    assert!(last(&split.train) < first(&split.val));
    assert!(last(&split.val) < first(&split.test));
}

fn series_strategy() -> impl Strategy<Value = LoadSeries> {
    (1usize..200, prop::collection::vec(0.0f64..1e5, 200), any::<bool>()).prop_map(|(n, vals, with_bus)| {
        let timestamps: Vec<NaiveDateTime> = (0..n).map(|i| default_start() + Duration::hours(i as i64)).collect();
        let total_load: Vec<f64> = vals[..n].to_vec();
        let bus_loads = with_bus.then(|| total_load.iter().map(|v| vec![0.25 * v, 0.75 * v]).collect());
        LoadSeries { timestamps, total_load, bus_loads, gaps_flagged: false }
    })
}

proptest! {
    #[test]
    fn csv_round_trip(series in series_strategy()) {
        let mut first = Vec::new();
        write_csv(&series, &mut first).unwrap();
        let back = read_csv(first.as_slice(), false).unwrap();
        prop_assert_eq!(&back.timestamps, &series.timestamps);
        for (a, b) in back.total_load.iter().zip(&series.total_load) {
            prop_assert!((a - b).abs() <= 1e-11 * b.abs().max(1.0));
        }
        let mut second = Vec::new();
        write_csv(&back, &mut second).unwrap();
        prop_assert_eq!(first, second);
    }
}
