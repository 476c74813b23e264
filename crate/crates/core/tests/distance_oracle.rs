use bankrun_core::entities::distance::damerau_levenshtein;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(5_000))]

    #[test]
    fn agrees_with_strsim(a in "[a-eé ]{0,12}", b in "[a-eé ]{0,12}") {
        prop_assert_eq!(damerau_levenshtein(&a, &b), strsim::damerau_levenshtein(&a, &b));
    }

    #[test]
    fn metric_axioms(a in "[a-d]{0,8}", b in "[a-d]{0,8}", c in "[a-d]{0,8}") {
        let ab = damerau_levenshtein(&a, &b);
        prop_assert_eq!(ab, damerau_levenshtein(&b, &a));
        prop_assert_eq!(ab == 0, a == b);
        prop_assert!(ab <= damerau_levenshtein(&a, &c) + damerau_levenshtein(&c, &b));
    }
}

#[test]
fn enterprise_transposition() {
    assert_eq!(damerau_levenshtein("Entreprise", "Enterprise"), 1);
    assert_eq!(strsim::damerau_levenshtein("Entreprise", "Enterprise"), 1);
}
