use overindep::cylinder::{correlation, independence_threshold, intersection_measure, oracle_measure};
use overindep::rational::q;
use overindep::verify::{cesaro_analytic_bound, cesaro_bound_value};
use overindep::*;
use proptest::prelude::*;

fn system(third: bool) -> BernoulliSystem {
    if third {
        BernoulliSystem::new(vec![q(1, 3), q(2, 3)]).unwrap()
    } else {
        BernoulliSystem::fair()
    }
}

fn pieces() -> impl Strategy<Value = Vec<(i64, Vec<u8>)>> {
    prop::collection::vec((-4i64..4, prop::collection::vec(0u8..2, 1..5)), 0..4)
}

fn build(p: &[(i64, Vec<u8>)]) -> CylinderUnion {
    CylinderUnion::union_all(2, p.iter().map(|(o, w)| CylinderUnion::cylinder(2, &Cylinder::new(*o, w.clone()))))
}

proptest! {
    #[test]
    fn measure_matches_enumeration(p in pieces(), third: bool) {
        let sys = system(third);
        let a = build(&p);
        prop_assert_eq!(a.measure(&sys).unwrap(), oracle_measure(&a, &sys).unwrap());
    }

    #[test]
    fn boolean_algebra_is_exact(p in pieces(), r in pieces(), third: bool) {
        let sys = system(third);
        let (a, b) = (build(&p), build(&r));
        let m = |s: &CylinderUnion| s.measure(&sys).unwrap();
        prop_assert_eq!(m(&a.union(&b)) + m(&a.intersect(&b)), m(&a) + m(&b));
        prop_assert_eq!(m(&a.complement()), Rational::one() - m(&a));
        prop_assert_eq!(m(&a.symmetric_difference(&b)), m(&a.difference(&b)) + m(&b.difference(&a)));
        prop_assert_eq!(a.union(&b), b.union(&a));
        prop_assert_eq!(a.is_disjoint(&b), m(&a.intersect(&b)).is_zero());
        prop_assert!(a.intersect(&b).is_subset(&a));
    }

    #[test]
    fn shifts_preserve_measure(p in pieces(), n in -40i64..40, third: bool) {
        let sys = system(third);
        let a = build(&p);
        prop_assert_eq!(a.shift(n).measure(&sys).unwrap(), a.measure(&sys).unwrap());
        prop_assert_eq!(a.shift(n).shift(-n), a);
    }

    #[test]
    fn far_shifts_are_independent(p in pieces(), r in pieces(), extra in 0i64..20, sign: bool) {
        let sys = BernoulliSystem::fair();
        let (a, b) = (build(&p), build(&r));
        let n = (independence_threshold(&a, &b) as i64 + extra) * if sign { 1 } else { -1 };
        let joint = intersection_measure(&[(&a, 0), (&b, n)], &sys).unwrap();
        prop_assert_eq!(joint, a.measure(&sys).unwrap() * b.measure(&sys).unwrap());
    }

    #[test]
    fn correlation_is_the_materialized_intersection(p in pieces(), n in -8i64..8, m in -8i64..8) {
        let sys = system(true);
        let a = build(&p);
        let direct = a.intersect(&a.shift(n)).intersect(&a.shift(m)).measure(&sys).unwrap();
        prop_assert_eq!(correlation(&a, &[n, m], &sys).unwrap(), direct);
    }

    #[test]
    fn rotation_correlation_is_the_rotated_overlap(s in 0i64..30, len in 1i64..30, n in -200i64..200) {
        let sys = RotationSystem::golden();
        let a = IntervalUnion::from_rationals(&[(q(s, 60), q((s + len).min(60), 60))]).unwrap();
        let c = interval_correlation(&a, n, &sys);
        prop_assert_eq!(c.clone(), rotate(&a, n, &sys).intersect(&a).measure());
        prop_assert!(c <= a.measure());
    }

    #[test]
    fn cesaro_bound_is_the_first_crossing(num in 1i64..50, n in 1u64..40) {
        let mu = q(num, 50);
        let big = cesaro_analytic_bound(&mu, n).unwrap();
        let mu2 = &mu * &mu;
        prop_assert!(cesaro_bound_value(&mu, n, big) < mu2);
        prop_assert!(cesaro_bound_value(&mu, n, big - 1) >= mu2);
    }
}
