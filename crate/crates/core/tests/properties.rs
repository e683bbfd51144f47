use proptest::prelude::*;

use bordered_signs::diagram::{builtin, Builtin, Reading};
use bordered_signs::sign_assign::{apply_gauge, gauge_equivalent, verify, BorderedSetup, ClassLabel};
use bordered_signs::structures::build_cfd;
use bordered_signs::torus_algebra::SignSequence;

fn sequence() -> impl Strategy<Value = SignSequence> {
    (0..4usize).prop_map(|i| SignSequence::ALL[i])
}

fn class() -> impl Strategy<Value = ClassLabel> {
    (0..4usize).prop_map(|i| ClassLabel::ALL[i])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Gauge changes keep an assignment valid and inside its class.
    #[test]
    fn gauge_preserves_validity_and_class(p in sequence(), c in class(), type_a in any::<bool>(), bits in any::<u64>()) {
        let setup = if type_a { BorderedSetup::type_a(p, 1) } else { BorderedSetup::type_d(p, 1) }.unwrap();
        let u = &setup.universe;
        let s = setup.in_class(c).unwrap();
        let w: Vec<i8> = (0..u.generators.len()).map(|i| if bits >> (i % 64) & 1 == 1 { -1 } else { 1 }).collect();
        let t = apply_gauge(u, &s, &w);
        prop_assert!(verify(u, &t).unwrap().ok());
        prop_assert_eq!(setup.classify(&t).unwrap(), c);
        prop_assert!(gauge_equivalent(u, &s, &t).unwrap().is_some());
    }

    /// Every type D structure of a built-in satisfies the relation in every class.
    #[test]
    fn cfd_relation_holds(p in sequence(), c in class(), which in 0..3usize) {
        let setup = BorderedSetup::type_d(p, 1).unwrap();
        let d = build_cfd(&builtin(Builtin::ALL[which], p, Reading::Left), &setup.universe, &setup.in_class(c).unwrap()).unwrap();
        prop_assert!(d.validate().is_ok());
        prop_assert!(d.reduce().validate().is_ok());
    }
}
