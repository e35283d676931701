use proptest::prelude::*;
use wavefront_core::birth::PiecewiseLinearBirth;
use wavefront_core::profile::{apply_operator, WaveProfile};
use wavefront_core::replication::sign_changes_exhaustive;
use wavefront_core::shape::count_sign_changes;
use wavefront_core::spectrum::{critical_speed, make_context, Branch, Quasipolynomial};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constant_profiles_map_to_g(v in 0.0f64..1.0, c in 0.72f64..0.9) {
        let g = PiecewiseLinearBirth::reference();
        let ctx = make_context(&g, 2.0, c).unwrap();
        let phi = WaveProfile::constant(c, 2.0, v, -3.0, 3.0, 0.05).unwrap();
        let a = apply_operator(&ctx, &phi).unwrap();
        for x in a {
            prop_assert!((x - g.value(v)).abs() < 1e-12);
        }
    }

    #[test]
    fn sign_count_matches_chain_search(values in prop::collection::vec(-1.0f64..1.0, 0..40)) {
        prop_assert_eq!(count_sign_changes(&values, 0.05), sign_changes_exhaustive(&values, 0.05));
    }

    #[test]
    fn tangency_is_a_double_root(k in 1.2f64..6.0, h in 0.2f64..4.0) {
        let t = critical_speed(k, h, Branch::PositiveDoubleRoot).unwrap();
        let qp = Quasipolynomial::new(t.c, h, k);
        prop_assert!(t.z > 0.0);
        prop_assert!(qp.eval(t.z).abs() < 1e-9);
        prop_assert!(qp.d1(t.z).abs() < 1e-7);
    }
}
