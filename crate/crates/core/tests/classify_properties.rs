mod common;

use common::*;
use emogait::classify::{
    build_prototypes, classify_knn, classify_prototype, KnnIndex, LabeledDescriptor, Metric,
    PreparedPrototypes,
};
use emogait::labels::{EmotionLabel, LabelSet};
use emogait::motion::MotionDescriptor;
use emogait::spd::{SpdMatrix, SymMatrix};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn label(name: &str) -> EmotionLabel {
    LabelSet::default().parse(name).unwrap()
}

fn item(c: SpdMatrix, l: &EmotionLabel, i: usize) -> LabeledDescriptor {
    LabeledDescriptor {
        descriptor: MotionDescriptor {
            covariance: c,
            source_id: format!("seq{i}"),
            window: (0, 2),
        },
        label: l.clone(),
        subject_id: format!("s{}", i % 3),
    }
}

/// `per_label` random descriptors for every default label, label-major.
fn random_set(r: &mut ChaCha8Rng, n: usize, per_label: usize) -> Vec<LabeledDescriptor> {
    let labels = LabelSet::default();
    let mut out = Vec::new();
    for l in labels.labels() {
        for _ in 0..per_label {
            let i = out.len();
            out.push(item(random_spd(r, n, 3.0), l, i));
        }
    }
    out
}

#[test]
fn frobenius_and_lerm_disagree_on_a_scale_example() {
    // Query I; anger at 0.01·I, joy at 2.5·I.
    // Frobenius: √2·0.99 < √2·1.5, so anger. LERM: √2·ln 100 > √2·ln 2.5, so joy.
    let train = vec![
        item(SpdMatrix::from_diag(&[0.01, 0.01]).unwrap(), &label("anger"), 0),
        item(SpdMatrix::from_diag(&[2.5, 2.5]).unwrap(), &label("joy"), 1),
    ];
    let q = SpdMatrix::identity(2);
    assert_eq!(classify_knn(&q, &train, 1, Metric::Frobenius).unwrap(), label("anger"));
    assert_eq!(classify_knn(&q, &train, 1, Metric::Lerm).unwrap(), label("joy"));

    let pems = build_prototypes(&train, Metric::Lerm).unwrap();
    let p = classify_prototype(&q, &pems, Metric::Lerm).unwrap();
    assert_eq!(p.label, label("joy"));
    let want = [2f64.sqrt() * 2.5f64.ln(), 2f64.sqrt() * 100f64.ln()];
    for ((_, got), want) in p.ranked.iter().zip(want) {
        assert!((got - want).abs() <= 1e-12);
    }
}

#[test]
fn equidistant_neighbours_resolve_to_the_first_label() {
    let train = vec![
        item(SpdMatrix::from_diag(&[2.0]).unwrap(), &label("sadness"), 0),
        item(SpdMatrix::from_diag(&[0.5]).unwrap(), &label("fear"), 1),
    ];
    let q = SpdMatrix::identity(1);
    assert_eq!(classify_knn(&q, &train, 1, Metric::Lerm).unwrap(), label("fear"));
    assert_eq!(classify_knn(&q, &train, 2, Metric::Lerm).unwrap(), label("fear"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn prototypes_classify_as_themselves(seed in any::<u64>(), n in 1usize..6, m in 1usize..4) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let train = random_set(&mut r, n, m);
        for metric in [Metric::Lerm, Metric::Frobenius] {
            let pems = build_prototypes(&train, metric).unwrap();
            let prepared = PreparedPrototypes::new(&pems, metric).unwrap();
            for (l, p) in &pems.prototypes {
                prop_assert_eq!(&prepared.classify(p).unwrap().label, l);
            }
        }
    }

    #[test]
    fn single_sample_knn_matches_prototype(seed in any::<u64>(), n in 1usize..6) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let train = random_set(&mut r, n, 1);
        let pems = build_prototypes(&train, Metric::Lerm).unwrap();
        let index = KnnIndex::new(&train, 1, Metric::Lerm).unwrap();
        for _ in 0..10 {
            let q = random_spd(&mut r, n, 3.0);
            let a = classify_prototype(&q, &pems, Metric::Lerm).unwrap();
            let b = index.classify(&q).unwrap();
            // Prototypes are exp(log C), so a near-tie may flip; the gap must then be tiny.
            if a.label != b {
                prop_assert!(a.ranked[1].1 - a.ranked[0].1 <= 1e-9);
            }
        }
    }

    #[test]
    fn lerm_labels_survive_orthogonal_congruence_and_scaling(seed in any::<u64>(), n in 1usize..6, k in 0.01f64..100.0) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let train = random_set(&mut r, n, 2);
        let q = random_orthogonal(&mut r, n);
        let warp = |c: &SpdMatrix| {
            let mut s = c.as_sym().congruence(&q).unwrap();
            s.scale(k);
            SpdMatrix::new(s).unwrap()
        };
        let warped: Vec<LabeledDescriptor> = train
            .iter()
            .enumerate()
            .map(|(i, d)| item(warp(&d.descriptor.covariance), &d.label, i))
            .collect();
        let pems = build_prototypes(&train, Metric::Lerm).unwrap();
        let wpems = build_prototypes(&warped, Metric::Lerm).unwrap();
        for _ in 0..5 {
            let c = random_spd(&mut r, n, 3.0);
            let a = classify_prototype(&c, &pems, Metric::Lerm).unwrap();
            let b = classify_prototype(&warp(&c), &wpems, Metric::Lerm).unwrap();
            if a.label != b.label {
                prop_assert!(a.ranked[1].1 - a.ranked[0].1 <= 1e-8);
            }
        }
    }

    #[test]
    fn training_order_does_not_matter(seed in any::<u64>(), n in 1usize..6, k in 1usize..6) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let train = random_set(&mut r, n, 3);
        let mut shuffled = train.clone();
        shuffled.shuffle(&mut r);
        let queries: Vec<SpdMatrix> = (0..8).map(|_| random_spd(&mut r, n, 3.0)).collect();
        for metric in [Metric::Lerm, Metric::Frobenius] {
            let pa = build_prototypes(&train, metric).unwrap();
            let pb = build_prototypes(&shuffled, metric).unwrap();
            prop_assert_eq!(&pa, &pb);
            let ka = KnnIndex::new(&train, k, metric).unwrap();
            let kb = KnnIndex::new(&shuffled, k, metric).unwrap();
            for q in &queries {
                prop_assert_eq!(ka.classify(q).unwrap(), kb.classify(q).unwrap());
            }
        }
    }
}

#[test]
fn mismatched_dimensions_are_rejected() {
    let train = vec![item(SpdMatrix::identity(2), &label("joy"), 0)];
    let q = SpdMatrix::new(SymMatrix::identity(3)).unwrap();
    assert!(classify_knn(&q, &train, 1, Metric::Lerm).is_err());
    let pems = build_prototypes(&train, Metric::Lerm).unwrap();
    assert!(classify_prototype(&q, &pems, Metric::Lerm).is_err());
}
