use bankrun_core::panel::{symmetric_growth, PanelError};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20_000))]

    #[test]
    fn antisymmetric_and_bounded(a in 0.0f64..1e9, b in 0.0f64..1e9) {
        prop_assume!(a > 0.0 || b > 0.0);
        let g = symmetric_growth(a, b).unwrap();
        let r = symmetric_growth(b, a).unwrap();
        prop_assert_eq!(g, -r);
        prop_assert!((-2.0..=2.0).contains(&g));
        prop_assert_eq!(g == 0.0, a == b);
    }

    #[test]
    fn entry_from_zero_is_two(x in 1e-300f64..1e300) {
        prop_assert_eq!(symmetric_growth(0.0, x), Ok(2.0));
        prop_assert_eq!(symmetric_growth(x, 0.0), Ok(-2.0));
    }
}

#[test]
fn both_zero_is_an_error() {
    assert_eq!(symmetric_growth(0.0, 0.0), Err(PanelError::BothZero));
}
