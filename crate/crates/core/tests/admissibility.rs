use proptest::prelude::*;
use rbnlab_core::occupation::{assumption_check, regularity_exponents};

#[test]
fn documented_bounds() {
    let a = assumption_check(0.2, 1.0, 0.8).unwrap();
    assert_eq!((a.h_bound, a.gamma0_bound), (0.25, 7.0 / 8.0));
    assert!(a.admissible);
    let a = assumption_check(0.2, 4.0, 0.8).unwrap();
    assert_eq!((a.h_bound, a.gamma0_bound), (2.0 / 7.0, 6.0 / 7.0));
    assert!(a.admissible);
    assert!(!assumption_check(0.3, 4.0, 0.8).unwrap().admissible);
    assert!(!assumption_check(0.2, 4.0, 0.9).unwrap().admissible);
}

#[test]
fn out_of_domain_inputs_are_errors() {
    assert!(assumption_check(0.0, 2.0, 0.8).is_err());
    assert!(assumption_check(0.2, 0.5, 0.8).is_err());
    assert!(regularity_exponents(1.0, 2.0).is_err());
}

proptest! {
    #[test]
    fn bounds_move_monotonically_in_p(p in 1.0f64..8.0, q in 1.0f64..8.0) {
        let (lo, hi) = if p < q { (p, q) } else { (q, p) };
        let a = assumption_check(0.1, lo, 0.6).unwrap();
        let b = assumption_check(0.1, hi, 0.6).unwrap();
        prop_assert!(a.h_bound <= b.h_bound);
        prop_assert!(a.gamma0_bound >= b.gamma0_bound);
        prop_assert!(b.gamma0_bound >= 6.0 / 7.0 - 1e-15);
        prop_assert!(b.h_bound <= 2.0 / 7.0 + 1e-15);
    }

    #[test]
    fn region_shrinks_with_lambda(h in 0.05f64..0.45, p in 1.0f64..6.0) {
        let e = regularity_exponents(h, p).unwrap();
        prop_assert!(e.gamma_max(0.0) >= e.gamma_max(0.5 * e.lambda_max.max(0.0)));
        prop_assert!(e.contains(0.0, e.gamma_max(0.0) - 0.01) || e.lambda_max <= 0.0);
        prop_assert!(!e.contains(0.0, e.gamma_max(0.0) + 0.01));
    }
}
