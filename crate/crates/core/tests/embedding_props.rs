use proptest::prelude::*;
use sphx_core::embedding::{encode, make_transform, map_vector, score, ProjectionVector, TransformKind, UnitVector};
use sphx_core::rng;

fn kind() -> impl Strategy<Value = TransformKind> {
    prop_oneof![
        Just(TransformKind::Gaussian),
        Just(TransformKind::Structured),
        Just(TransformKind::BiasedStructured),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mapping_is_deterministic_in_the_seed(kind in kind(), d in 1usize..40, e in 6u32..11, seed in any::<u64>(), h in 0.0f64..3.0) {
        let m = 1usize << e;
        let x = UnitVector::new(rng::random_unit(&mut rng::seeded(seed ^ 1), d)).unwrap();
        let a = map_vector(&make_transform(kind, d, m, seed).unwrap(), &x, h).unwrap();
        let b = map_vector(&make_transform(kind, d, m, seed).unwrap(), &x, h).unwrap();
        prop_assert_eq!(a.clone(), b);
        prop_assert!((score(&a, &a).unwrap() - a.k() as f64 / m as f64).abs() == 0.0);
    }

    #[test]
    fn structured_kinds_preserve_norm(biased in any::<bool>(), d in 1usize..64, e in 6u32..13, seed in any::<u64>()) {
        let m = 1usize << e;
        let kind = if biased { TransformKind::BiasedStructured } else { TransformKind::Structured };
        let x = UnitVector::new(rng::random_unit(&mut rng::seeded(seed), d)).unwrap();
        let p = make_transform(kind, d, m, seed).unwrap().apply(&x).unwrap();
        prop_assert!((p.norm_sq() - m as f64).abs() <= 1e-9 * m as f64);
    }

    #[test]
    fn higher_threshold_gives_a_subset(values in proptest::collection::vec(-4.0f64..4.0, 1..200), a in 0.0f64..4.0, b in 0.0f64..4.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let p = ProjectionVector::new(values);
        let (cl, ch) = (encode(&p, lo), encode(&p, hi));
        prop_assert!(ch.support().iter().all(|i| cl.contains(*i)));
    }
}
