use bankrun_core::textfilter::{clean_text, CompiledRules};
use proptest::prelude::*;

const WORDS: &[&str] = &[
    "bank", "banks", "run", "runs", "on", "the", "river", "snow", "suspended", "suspension", "bridge", "receiver", "appointed",
    "depositors", "panic", "withdrawals", "large", "sixty", "days", "notice", "closed", "its", "doors", "trains", "are", "running",
    "home", "note", "loan", "national", "first", "trust", "company", "of", "albany", "yesterday", "quiet", "market",
];

fn text() -> impl Strategy<Value = String> {
    proptest::collection::vec((prop::sample::select(WORDS), prop::sample::select(&[" ", "  ", ", ", ". ", "\n"][..])), 0..60)
        .prop_map(|v| v.into_iter().map(|(w, s)| format!("{w}{s}")).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn cleaning_is_idempotent(t in text()) {
        let once = clean_text(&t);
        prop_assert_eq!(clean_text(&once), once);
    }

    #[test]
    fn case_does_not_matter(t in text()) {
        let rules = CompiledRules::default_rules();
        let upper = rules.match_rules(&rules.clean_text(&t.to_uppercase()));
        let lower = rules.match_rules(&rules.clean_text(&t));
        prop_assert_eq!(upper, lower);
    }

    #[test]
    fn appending_text_never_removes_matches(a in text(), b in text()) {
        let rules = CompiledRules::default_rules();
        let before = rules.match_rules(&rules.clean_text(&a));
        let after = rules.match_rules(&rules.clean_text(&format!("{a} zzqx {b}")));
        prop_assert!(before.is_subset(&after), "{:?} vs {:?}", before, after);
    }
}
