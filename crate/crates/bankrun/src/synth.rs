//! A synthetic world on disk: articles, the bank registry and gazetteer
//! they refer to, the planted ground truth, replay fixtures that answer
//! every model call the pipeline will make, and a config tying them together.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use bankrun_core::corpus::{generate_synthetic, ArticleRecord, PlantedEvent, SynthBank, SynthCorpus, SynthSpec};
use bankrun_core::entities::{BankRecord, CharterType, ResolvedEvent};
use bankrun_core::episodes::{classify_episode, group_events, EpisodeType, GroupingRule, SelectionPolicy};
use bankrun_core::llmgate::mock::MockClient;
use bankrun_core::llmgate::{EventType, ResponseFlags, Stage};
use serde_json::{json, Value};

use crate::client::save_fixtures;
use crate::error::{Error, Result};
use crate::inputs::GazetteerCsvRow;
use crate::io::{write_atomic, write_csv, write_jsonl};
use crate::pipeline::episode_articles;

pub fn charter_of(b: &SynthBank) -> CharterType {
    if b.national {
        CharterType::National
    } else if b.name.ends_with("Savings Bank") {
        CharterType::Savings
    } else if b.name.ends_with("Trust Company") {
        CharterType::Trust
    } else {
        CharterType::State
    }
}

pub fn registry(banks: &[SynthBank]) -> Vec<BankRecord> {
    banks
        .iter()
        .map(|b| BankRecord {
            bank_id: b.key.clone(),
            canonical_name: b.name.clone(),
            state_fips: b.state_fips,
            canonical_city: b.city.clone(),
            charter_type: charter_of(b),
            active_from: None,
            active_to: None,
        })
        .collect()
}

pub fn gazetteer(banks: &[SynthBank]) -> Vec<GazetteerCsvRow> {
    let places: BTreeSet<(u8, &str)> = banks.iter().map(|b| (b.state_fips, b.city.as_str())).collect();
    places
        .into_iter()
        .map(|(fips, city)| GazetteerCsvRow {
            state_fips: fips,
            canonical_city: city.to_string(),
            alt_spellings: String::new(),
            sources: String::from("synthetic"),
        })
        .collect()
}

/// Planted events as a perfect resolver would return them.
pub fn truth_resolved(corpus: &SynthCorpus) -> Vec<ResolvedEvent> {
    let banks: BTreeMap<&str, &SynthBank> = corpus.banks.iter().map(|b| (b.key.as_str(), b)).collect();
    corpus
        .planted
        .iter()
        .map(|p| {
            let b = banks[p.bank_key.as_str()];
            ResolvedEvent {
                event: p.event.clone(),
                bank_id: Some(b.key.clone()),
                charter: charter_of(b),
                state_fips: Some(b.state_fips),
                city: Some(b.city.clone()),
                method: None,
                score: 1.0,
                probable_national: b.national,
                problems: Vec::new(),
            }
        })
        .collect()
}

fn event_json(e: &bankrun_core::llmgate::ArticleEvent, with_place: bool) -> Value {
    let mut v = json!({
        "article_id": e.article_id,
        "event_type": e.event_type.as_str(),
        "event_date": e.event_date.to_string(),
        "date_precision": "day",
    });
    if with_place {
        v["bank_name"] = json!(e.bank_name_raw);
        v["state"] = json!(e.state_raw);
        v["city"] = json!(e.city_raw);
    }
    v
}

/// Replies a faithful model would give for every call on this corpus.
/// Filler articles that reach the model are discarded as unrelated.
pub fn fixtures(corpus: &SynthCorpus, grouping: GroupingRule, policy: SelectionPolicy) -> Result<MockClient> {
    let mut m = MockClient::named("synthetic");
    let mut by_article: BTreeMap<&str, Vec<&PlantedEvent>> = BTreeMap::new();
    for p in &corpus.planted {
        by_article.entry(p.event.article_id.as_str()).or_default().push(p);
    }
    let discard = serde_json::to_string(&json!({"verdict": "discard", "reason": "unrelated"})).unwrap();
    let keep = serde_json::to_string(&json!({"verdict": "keep"})).unwrap();
    for a in &corpus.articles {
        match by_article.get(a.article_id.as_str()) {
            Some(ps) => {
                m.insert_article(Stage::Quick, a, &keep);
                let events: Vec<Value> = ps.iter().map(|p| event_json(&p.event, true)).collect();
                m.insert_article(Stage::Events, a, &json!({ "events": events }).to_string());
            }
            None => m.insert_article(Stage::Quick, a, &discard),
        }
    }

    let by_id: BTreeMap<&str, &ArticleRecord> = corpus.articles.iter().map(|a| (a.article_id.as_str(), a)).collect();
    let eps = group_events(&truth_resolved(corpus), grouping).map_err(|e| Error::Data(e.to_string()))?;
    let no_flags: Value = ResponseFlags::FIELDS.iter().map(|f| (f.to_string(), Value::Bool(false))).collect::<serde_json::Map<_, _>>().into();
    for ep in &eps {
        let arts = episode_articles(ep, &by_id, policy);
        let kept: BTreeSet<&str> = arts.iter().map(|a| a.article_id.as_str()).collect();
        let events: Vec<Value> = ep.events.iter().filter(|e| kept.contains(e.article_id.as_str())).map(|e| event_json(e, false)).collect();
        let hint = classify_episode(ep).unwrap_or(EpisodeType::Other);
        let reply = json!({
            "narrative": format!("{} events reported for {}.", ep.events.len(), ep.events[0].bank_name_raw),
            "episode_type": hint.as_str(),
            "events": events,
        });
        m.insert_episode(Stage::Episode, &ep.episode_id, &arts, &reply.to_string());
        if ep.events.iter().any(|e| e.event_type == EventType::Run) {
            m.insert_episode(Stage::Responses, &ep.episode_id, &arts, &no_flags.to_string());
            m.insert_episode(Stage::Nonfundamental, &ep.episode_id, &arts, &json!({"nonfundamental": "unclear"}).to_string());
        }
    }
    Ok(m)
}

/// Where `write` put things.
#[derive(Debug, Clone)]
pub struct SynthFiles {
    pub dir: PathBuf,
    pub config: PathBuf,
    pub articles: PathBuf,
    pub planted: PathBuf,
    pub corpus: SynthCorpus,
}

pub const CONFIG_FILE: &str = "bankrun.toml";

/// Generates the corpus and writes it with everything needed to run the
/// pipeline on it in mock mode.
pub fn write(dir: &Path, spec: &SynthSpec, grouping: GroupingRule, policy: SelectionPolicy) -> Result<SynthFiles> {
    let corpus = generate_synthetic(spec)?;
    let articles = dir.join("articles.jsonl");
    write_jsonl(&articles, &corpus.articles)?;
    let planted = dir.join("planted.jsonl");
    write_jsonl(&planted, &corpus.planted)?;
    write_csv(&dir.join("registry.csv"), &registry(&corpus.banks))?;
    write_csv(&dir.join("gazetteer.csv"), &gazetteer(&corpus.banks))?;
    save_fixtures(&dir.join("mock_fixtures.jsonl"), &fixtures(&corpus, grouping, policy)?)?;
    let grouping_toml = match grouping {
        GroupingRule::ChainGap(d) => format!("rule = \"chain_gap\"\ndays = {d}"),
        GroupingRule::TotalSpan(d) => format!("rule = \"total_span\"\ndays = {d}"),
    };
    let policy_name = match policy {
        SelectionPolicy::LongestFirst => "longest_first",
        SelectionPolicy::EarliestFirst => "earliest_first",
    };
    let config = format!(
        "seed = {seed}\n\n\
         [paths]\n\
         work_dir = \"work\"\n\
         articles = \"articles.jsonl\"\n\
         registry = \"registry.csv\"\n\
         gazetteer = \"gazetteer.csv\"\n\n\
         [llm]\n\
         mode = \"mock\"\n\
         fixtures = \"mock_fixtures.jsonl\"\n\n\
         [episodes]\n\
         selection = \"{policy_name}\"\n\n\
         [episodes.grouping]\n\
         {grouping_toml}\n\n\
         [analysis]\n\
         reports = [\"table1\", \"fig1\", \"fig4\", \"fig6\"]\n",
        seed = spec.rng_seed,
    );
    let config_path = dir.join(CONFIG_FILE);
    write_atomic(&config_path, config.as_bytes())?;
    Ok(SynthFiles { dir: dir.to_path_buf(), config: config_path, articles, planted, corpus })
}
