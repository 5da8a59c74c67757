use fairsense_core::backends::UsageRecord;
use fairsense_core::telemetry::{aggregate, record, EnergyConfig, RunTelemetry, JOULES_PER_KWH};
use proptest::prelude::*;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn telemetry() -> impl Strategy<Value = RunTelemetry> {
    (0u64..1_000_000, 0u64..100_000, 0.0..1e6f64, 0.0..1e3f64).prop_map(
        |(tokens_total, wall_ms, joules, gco2e)| RunTelemetry {
            tokens_total,
            wall_ms,
            joules,
            gco2e,
        },
    )
}

fn same(a: &RunTelemetry, b: &RunTelemetry) -> bool {
    a.tokens_total == b.tokens_total
        && a.wall_ms == b.wall_ms
        && close(a.joules, b.joules)
        && close(a.gco2e, b.gco2e)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn record_is_linear_in_tokens(
        a in 0u64..500_000, b in 0u64..500_000,
        jpt in 0.0..10.0f64, grid in 0.0..1000.0f64,
    ) {
        let cfg = EnergyConfig::new(jpt, grid).unwrap();
        let usage = |n| UsageRecord { tokens_in: n, tokens_out: 0, wall_ms: 0 };
        let sum = record(&usage(a + b), &cfg);
        let parts = record(&usage(a), &cfg).combine(&record(&usage(b), &cfg));
        prop_assert!(same(&sum, &parts));
        prop_assert!(close(sum.joules, (a + b) as f64 * jpt));
        prop_assert!(close(sum.gco2e, (a + b) as f64 * jpt / JOULES_PER_KWH * grid));
    }

    #[test]
    fn aggregate_laws(a in telemetry(), b in telemetry(), c in telemetry()) {
        let left = aggregate([&aggregate([&a, &b]), &c]);
        let right = aggregate([&a, &aggregate([&b, &c])]);
        prop_assert!(same(&left, &right));
        prop_assert!(same(&aggregate([&a, &b]), &aggregate([&b, &a])));
        prop_assert_eq!(aggregate([&a, &RunTelemetry::zero()]), a);
    }
}

#[test]
fn one_kwh_at_400_grams() {
    let cfg = EnergyConfig::new(1.0, 400.0).unwrap();
    let t = record(
        &UsageRecord {
            tokens_in: 3_600_000,
            tokens_out: 0,
            wall_ms: 0,
        },
        &cfg,
    );
    assert_eq!(t.joules, 3.6e6);
    assert_eq!(t.gco2e, 400.0);
}

#[test]
fn empty_aggregate_is_zero() {
    assert_eq!(aggregate(std::iter::empty()), RunTelemetry::zero());
}

#[test]
fn rejects_bad_factors() {
    assert!(EnergyConfig::new(-1.0, 400.0).is_err());
    assert!(EnergyConfig::new(1.0, f64::NAN).is_err());
}
