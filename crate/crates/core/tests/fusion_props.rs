use fairsense_core::finding::{BiasFinding, Modality, Span};
use fairsense_core::fusion::{
    band_of, contextual_score, fuse_scores, normalize_weights, BiasComponents, FusionWeights,
    SeverityBand,
};
use proptest::prelude::*;

/// Direct weighted mean over the present components.
fn oracle(c: [Option<f64>; 3], w: [f64; 3]) -> f64 {
    let num: f64 = c.iter().zip(w).filter_map(|(v, w)| v.map(|v| v * w)).sum();
    let den: f64 = c.iter().zip(w).filter_map(|(v, w)| v.map(|_| w)).sum();
    num / den
}

fn unit() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(1.0), 0.0..=1.0f64]
}

fn components() -> impl Strategy<Value = [Option<f64>; 3]> {
    [
        proptest::option::of(unit()),
        proptest::option::of(unit()),
        proptest::option::of(unit()),
    ]
    .prop_filter("at least one component", |c| c.iter().any(Option::is_some))
}

fn weights() -> impl Strategy<Value = [f64; 3]> {
    [0.01..10.0f64, 0.01..10.0f64, 0.01..10.0f64]
}

fn build(c: [Option<f64>; 3]) -> BiasComponents {
    BiasComponents::new(c[0], c[1], c[2])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn matches_direct_evaluation(c in components(), w in weights()) {
        let got = fuse_scores(&build(c), &FusionWeights::new(w[0], w[1], w[2])).unwrap();
        prop_assert!((got.value - oracle(c, w)).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&got.value));
        prop_assert_eq!(got.band, band_of(got.value).unwrap());
    }

    #[test]
    fn scale_invariant(c in components(), w in weights(), k in 0.001..1000.0f64) {
        let a = fuse_scores(&build(c), &FusionWeights::new(w[0], w[1], w[2])).unwrap();
        let b = fuse_scores(&build(c), &FusionWeights::new(k * w[0], k * w[1], k * w[2])).unwrap();
        prop_assert!((a.value - b.value).abs() <= 1e-12);
    }

    #[test]
    fn monotone_in_each_component(c in components(), w in weights(), pick in any::<prop::sample::Index>(), bump in 0.0..=1.0f64) {
        let present: Vec<usize> = (0..3).filter(|&i| c[i].is_some()).collect();
        let which = present[pick.index(present.len())];
        let mut raised = c;
        let v = c[which].unwrap();
        raised[which] = Some(v + (1.0 - v) * bump);
        let fw = FusionWeights::new(w[0], w[1], w[2]);
        let lo = fuse_scores(&build(c), &fw).unwrap().value;
        let hi = fuse_scores(&build(raised), &fw).unwrap().value;
        prop_assert!(hi >= lo - 1e-15);
    }

    #[test]
    fn bounded_by_extremes(c in components(), w in weights()) {
        let present: Vec<f64> = c.iter().flatten().copied().collect();
        let min = present.iter().copied().fold(f64::INFINITY, f64::min);
        let max = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let v = fuse_scores(&build(c), &FusionWeights::new(w[0], w[1], w[2])).unwrap().value;
        prop_assert!(v >= min - 1e-12 && v <= max + 1e-12);
    }

    #[test]
    fn normalized_weights_sum_to_one(w in weights()) {
        let n = normalize_weights(FusionWeights::new(w[0], w[1], w[2])).unwrap();
        prop_assert!((n.alpha + n.beta + n.gamma - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn bands_are_monotone(a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(band_of(lo).unwrap() <= band_of(hi).unwrap());
    }

    #[test]
    fn context_score_is_symmetric_and_bounded(
        a in proptest::collection::vec(0usize..5, 0..6),
        b in proptest::collection::vec(0usize..5, 0..6),
    ) {
        let fa = findings(&a);
        let fb = findings(&b);
        let ab = contextual_score(&fa, &fb);
        prop_assert_eq!(ab, contextual_score(&fb, &fa));
        prop_assert!((0.0..=1.0).contains(&ab));
        if !fa.is_empty() {
            prop_assert_eq!(contextual_score(&fa, &fa), 1.0);
        }
    }
}

const CATEGORIES: [&str; 5] = ["gender", "race", "age", "ability", "religion"];

fn findings(cats: &[usize]) -> Vec<BiasFinding> {
    cats.iter()
        .map(|&c| BiasFinding {
            id: String::new(),
            modality: Modality::OcrText,
            span: Span::new(0, 1),
            category: CATEGORIES[c].to_string(),
            severity: 0.5,
            excerpt: String::new(),
            explanation: String::new(),
        })
        .collect()
}

#[test]
fn band_edges() {
    let cases = [
        (0.0, SeverityBand::Minimal),
        (0.199_999, SeverityBand::Minimal),
        (0.2, SeverityBand::Low),
        (0.4, SeverityBand::Moderate),
        (0.6, SeverityBand::High),
        (0.8, SeverityBand::Critical),
        (1.0, SeverityBand::Critical),
    ];
    for (v, band) in cases {
        assert_eq!(band_of(v).unwrap(), band, "{v}");
    }
    assert!(band_of(1.000_001).is_err());
    assert!(band_of(-0.1).is_err());
}

#[test]
fn zero_weight_on_only_present_component_is_rejected() {
    let err = fuse_scores(
        &BiasComponents::text_only(0.5),
        &FusionWeights::new(0.0, 1.0, 1.0),
    );
    assert!(matches!(err, Err(fairsense_core::Error::DegenerateWeights(_))));
}
