use locmix_core::hyperbolic::*;
use proptest::prelude::*;

fn arb_point() -> impl Strategy<Value = Point> {
    (-5.0f64..5.0, -2.0f64..1.5).prop_map(|(x, ly)| Point::new(x, 10f64.powf(ly)).unwrap())
}

/// Integer matrices with determinant one and entries up to 10³, built as
/// products of elementary matrices so the determinant is exact.
fn arb_int_moebius() -> impl Strategy<Value = IntMoebius> {
    prop::collection::vec((any::<bool>(), -6i64..=6), 1..6).prop_filter_map("entries too large", |ops| {
        let mut m = IntMoebius::identity();
        for (upper, k) in ops {
            let e = if upper {
                IntMoebius::new(1, k, 0, 1).unwrap()
            } else {
                IntMoebius::new(1, 0, k, 1).unwrap()
            };
            m = m.compose(&e);
        }
        let e = m.entries();
        let small = [&e.a, &e.b, &e.c, &e.d]
            .iter()
            .all(|v| i64::try_from(*v).map(|x| x.abs() <= 1000).unwrap_or(false));
        small.then_some(m)
    })
}

fn arb_tangent() -> impl Strategy<Value = UnitTangent> {
    (arb_point(), 0.0f64..std::f64::consts::TAU).prop_map(|(z, a)| UnitTangent::from_point_angle(z, a))
}

proptest! {
    #[test]
    fn integer_isometries_preserve_distance(m in arb_int_moebius(), z in arb_point(), w in arb_point()) {
        let d0 = dist(z, w);
        let d1 = dist(m.apply(z), m.apply(w));
        prop_assert!((d0 - d1).abs() < 1e-9 * (1.0 + d0), "{} vs {}", d0, d1);
    }

    #[test]
    fn dist_from_origin_is_orbit_distance(m in arb_int_moebius()) {
        let direct = dist(Point::origin(), m.apply(Point::origin()));
        prop_assert!((m.dist_from_origin() - direct).abs() < 1e-12 * (1.0 + direct));
    }

    #[test]
    fn classification_is_conjugation_invariant(m in arb_int_moebius(), g in arb_int_moebius()) {
        let c = g.compose(&m).compose(&g.inverse());
        prop_assert_eq!(c.classify(), m.classify());
        prop_assert_eq!(c.abs_trace(), m.abs_trace());
    }

    #[test]
    fn translation_length_of_inverse(m in arb_int_moebius()) {
        match (m.translation_length(), m.inverse().translation_length()) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "inverse changed the class"),
        }
    }

    #[test]
    fn flow_is_a_one_parameter_group(v in arb_tangent(), s in -5.0f64..5.0, t in -5.0f64..5.0) {
        let a = v.flow(s).flow(t);
        let b = v.flow(s + t);
        let (pa, pb) = (a.base_point(), b.base_point());
        prop_assert!(dist(pa, pb) < 1e-9);
        let da = (a.angle() - b.angle()).rem_euclid(std::f64::consts::TAU);
        prop_assert!(da.min(std::f64::consts::TAU - da) < 1e-9);
    }

    #[test]
    fn flow_moves_at_unit_speed(v in arb_tangent(), t in -5.0f64..5.0) {
        let d = dist(v.base_point(), v.flow(t).base_point());
        prop_assert!((d - t.abs()).abs() < 1e-9);
    }

    #[test]
    fn sign_canonicalization_is_idempotent(m in arb_int_moebius()) {
        let again = IntMoebius::from_mat(m.entries().clone()).unwrap();
        prop_assert_eq!(&again, &m);
        prop_assert!(m.compose(&m.inverse()).is_identity());
    }
}
