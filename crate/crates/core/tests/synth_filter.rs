use bankrun_core::corpus::{generate_synthetic, SynthSpec};
use bankrun_core::textfilter::CompiledRules;

#[test]
fn every_planted_article_passes_the_default_rules() {
    let rules = CompiledRules::default_rules();
    for seed in 1..=5 {
        let spec = SynthSpec { n_articles: 400, n_planted_events: 150, rng_seed: seed, ..SynthSpec::default() };
        let c = generate_synthetic(&spec).unwrap();
        for p in &c.planted {
            let a = c.articles.iter().find(|a| a.article_id == p.event.article_id).unwrap();
            assert!(rules.screen(a).is_some(), "{}", a.text);
        }
    }
}

#[test]
fn decoys_and_filler_never_pass() {
    let rules = CompiledRules::default_rules();
    let c = generate_synthetic(&SynthSpec { n_articles: 600, n_planted_events: 50, noise_rate: 0.6, ..SynthSpec::default() }).unwrap();
    let planted: std::collections::BTreeSet<&str> = c.planted.iter().map(|p| p.event.article_id.as_str()).collect();
    for a in c.articles.iter().filter(|a| !planted.contains(a.article_id.as_str())) {
        assert!(rules.screen(a).is_none(), "{}", a.text);
    }
}
