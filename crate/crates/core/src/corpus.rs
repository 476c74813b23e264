//! Article records, their validation, and a synthetic corpus generator with
//! planted distress events.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::Deref;

use chrono::{Datelike, Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dates::{DatePrecision, PartialDate};
use crate::llmgate::{ArticleEvent, EventType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    #[default]
    ChroniclingAmerica,
    CommercialA,
    CommercialB,
    Synthetic,
}

/// One newspaper article after OCR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleRecord {
    pub article_id: String,
    #[serde(default)]
    pub source: Source,
    #[serde(rename = "date")]
    pub publication_date: PartialDate,
    #[serde(rename = "newspaper", default)]
    pub newspaper_name: String,
    #[serde(rename = "state", default)]
    pub state_raw: String,
    #[serde(rename = "city", default)]
    pub city_raw: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ocr_quality: Option<f64>,
}

pub fn earliest_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(1800, 1, 1).unwrap()
}

pub fn latest_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(1967, 12, 31).unwrap()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("article {0}: empty text")]
    EmptyText(String),
    #[error("article {id}: date {date} outside 1800-01-01..=1967-12-31")]
    DateOutOfRange { id: String, date: NaiveDate },
    #[error("article {id}: bad encoding ({reason})")]
    BadEncoding { id: String, reason: String },
    #[error("duplicate article_id {0}")]
    DuplicateId(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

/// An article that satisfies every record invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValidatedArticle(ArticleRecord);

impl ValidatedArticle {
    pub fn into_inner(self) -> ArticleRecord {
        self.0
    }
}

impl Deref for ValidatedArticle {
    type Target = ArticleRecord;
    fn deref(&self) -> &ArticleRecord {
        &self.0
    }
}

/// Collapses runs of whitespace to one space and trims the ends.
pub fn normalize_whitespace(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

pub fn validate_article(mut record: ArticleRecord) -> Result<ValidatedArticle, CorpusError> {
    if let Some(c) = record.text.chars().find(|&c| c == '\u{FFFD}' || (c.is_control() && !c.is_whitespace())) {
        return Err(CorpusError::BadEncoding {
            id: record.article_id,
            reason: format!("character U+{:04X}", c as u32),
        });
    }
    if record.article_id.trim().is_empty() {
        return Err(CorpusError::BadEncoding { id: record.article_id, reason: String::from("empty article_id") });
    }
    let text = normalize_whitespace(&record.text);
    if text.is_empty() {
        return Err(CorpusError::EmptyText(record.article_id));
    }
    let d = record.publication_date.date;
    if d < earliest_date() || d > latest_date() {
        return Err(CorpusError::DateOutOfRange { id: record.article_id, date: d });
    }
    if let Some(q) = record.ocr_quality {
        if !(0.0..=1.0).contains(&q) {
            record.ocr_quality = None;
        }
    }
    record.text = text;
    record.newspaper_name = normalize_whitespace(&record.newspaper_name);
    record.state_raw = normalize_whitespace(&record.state_raw);
    record.city_raw = normalize_whitespace(&record.city_raw);
    Ok(ValidatedArticle(record))
}

/// Sorts by (publication date, article id) and rejects repeated ids.
pub fn build_collection(mut records: Vec<ArticleRecord>) -> Result<Vec<ArticleRecord>, CorpusError> {
    records.sort_by(|a, b| a.publication_date.cmp(&b.publication_date).then_with(|| a.article_id.cmp(&b.article_id)));
    let mut seen = BTreeSet::new();
    for r in &records {
        if !seen.insert(r.article_id.as_str()) {
            return Err(CorpusError::DuplicateId(r.article_id.clone()));
        }
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_articles: usize,
    pub n_planted_events: usize,
    pub event_mix: BTreeMap<EventType, f64>,
    /// Share of all articles that are decoys built from excluded phrases.
    pub noise_rate: f64,
    pub rng_seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        let mut mix = BTreeMap::new();
        mix.insert(EventType::Run, 0.4);
        mix.insert(EventType::Suspension, 0.2);
        mix.insert(EventType::PartialSuspension, 0.05);
        mix.insert(EventType::Failure, 0.1);
        mix.insert(EventType::Receivership, 0.1);
        mix.insert(EventType::Reopening, 0.1);
        mix.insert(EventType::Other, 0.05);
        Self { n_articles: 1000, n_planted_events: 100, event_mix: mix, noise_rate: 0.5, rng_seed: 1 }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.n_planted_events > self.n_articles {
            return Err(CorpusError::InvalidSpec(format!(
                "{} planted events need at least as many articles, got {}",
                self.n_planted_events, self.n_articles
            )));
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return Err(CorpusError::InvalidSpec(format!("noise_rate {} outside [0, 1]", self.noise_rate)));
        }
        if self.event_mix.values().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(CorpusError::InvalidSpec(String::from("negative or non-finite event proportion")));
        }
        let total: f64 = self.event_mix.values().sum();
        if self.n_planted_events > 0 && (total - 1.0).abs() > 1e-9 {
            return Err(CorpusError::InvalidSpec(format!("event proportions sum to {total}")));
        }
        Ok(())
    }

    /// Events per type by largest remainder, so counts sum to `n_planted_events`.
    pub fn allocation(&self) -> Vec<(EventType, usize)> {
        let n = self.n_planted_events;
        let mut out: Vec<(EventType, usize, f64)> = self
            .event_mix
            .iter()
            .map(|(&t, &p)| {
                let exact = p * n as f64;
                let floor = libm::floor(exact);
                (t, floor as usize, exact - floor)
            })
            .collect();
        let assigned: usize = out.iter().map(|x| x.1).sum();
        let mut order: Vec<usize> = (0..out.len()).collect();
        order.sort_by(|&a, &b| out[b].2.partial_cmp(&out[a].2).unwrap().then(a.cmp(&b)));
        for &i in order.iter().take(n.saturating_sub(assigned)) {
            out[i].1 += 1;
        }
        out.into_iter().map(|(t, c, _)| (t, c)).collect()
    }
}

/// A bank that exists in the synthetic world.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthBank {
    pub key: String,
    pub name: String,
    pub state: String,
    pub state_fips: u8,
    pub city: String,
    pub national: bool,
}

/// Ground truth for one planted event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedEvent {
    pub bank_key: String,
    pub event: ArticleEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthCorpus {
    pub articles: Vec<ArticleRecord>,
    pub planted: Vec<PlantedEvent>,
    /// Every bank the generator could have used, planted or not.
    pub banks: Vec<SynthBank>,
}

const CITIES: [(&str, &str, u8); 40] = [
    ("Boston", "Massachusetts", 25),
    ("Worcester", "Massachusetts", 25),
    ("Providence", "Rhode Island", 44),
    ("Hartford", "Connecticut", 9),
    ("New Haven", "Connecticut", 9),
    ("Albany", "New York", 36),
    ("Buffalo", "New York", 36),
    ("Rochester", "New York", 36),
    ("Newark", "New Jersey", 34),
    ("Trenton", "New Jersey", 34),
    ("Philadelphia", "Pennsylvania", 42),
    ("Pittsburgh", "Pennsylvania", 42),
    ("Allegheny", "Pennsylvania", 42),
    ("Baltimore", "Maryland", 24),
    ("Wilmington", "Delaware", 10),
    ("Richmond", "Virginia", 51),
    ("Wheeling", "West Virginia", 54),
    ("Raleigh", "North Carolina", 37),
    ("Charleston", "South Carolina", 45),
    ("Atlanta", "Georgia", 13),
    ("Mobile", "Alabama", 1),
    ("Nashville", "Tennessee", 47),
    ("Louisville", "Kentucky", 21),
    ("Cincinnati", "Ohio", 39),
    ("Cleveland", "Ohio", 39),
    ("Indianapolis", "Indiana", 18),
    ("Detroit", "Michigan", 26),
    ("Milwaukee", "Wisconsin", 55),
    ("Minneapolis", "Minnesota", 27),
    ("Des Moines", "Iowa", 19),
    ("St. Louis", "Missouri", 29),
    ("Kansas City", "Missouri", 29),
    ("Omaha", "Nebraska", 31),
    ("Topeka", "Kansas", 20),
    ("Denver", "Colorado", 8),
    ("Helena", "Montana", 30),
    ("Portland", "Oregon", 41),
    ("Seattle", "Washington", 53),
    ("Dallas", "Texas", 48),
    ("New Orleans", "Louisiana", 22),
];

const STEMS: [&str; 30] = [
    "First", "Second", "Third", "Citizens", "Farmers", "Merchants", "Mechanics", "Traders", "Union", "Peoples",
    "Commercial", "German", "American", "Exchange", "Security", "Central", "Planters", "Drovers", "Enterprise",
    "Continental", "Columbia", "Lincoln", "Franklin", "Hamilton", "Fidelity", "Guardian", "Manufacturers",
    "Importers", "Marine", "Metropolitan",
];

/// The full synthetic bank universe: every stem in every city, national,
/// plus a savings bank and a trust company per city.
pub fn synthetic_banks() -> Vec<SynthBank> {
    let mut out = Vec::new();
    for (ci, &(city, state, fips)) in CITIES.iter().enumerate() {
        for (si, stem) in STEMS.iter().enumerate() {
            out.push(SynthBank {
                key: format!("syn-{ci:02}-{si:02}"),
                name: format!("{stem} National Bank of {city}"),
                state: state.to_string(),
                state_fips: fips,
                city: city.to_string(),
                national: true,
            });
        }
        out.push(SynthBank {
            key: format!("syn-{ci:02}-sv"),
            name: format!("{city} Savings Bank"),
            state: state.to_string(),
            state_fips: fips,
            city: city.to_string(),
            national: false,
        });
        out.push(SynthBank {
            key: format!("syn-{ci:02}-tc"),
            name: format!("{city} Trust Company"),
            state: state.to_string(),
            state_fips: fips,
            city: city.to_string(),
            national: false,
        });
    }
    out
}

const MONTHS: [&str; 12] = [
    "January", "February", "March", "April", "May", "June", "July", "August", "September", "October",
    "November", "December",
];

fn long_date(d: NaiveDate) -> String {
    format!("{} {}, {}", MONTHS[d.month0() as usize], d.day(), d.year())
}

/// How the bank's name is printed in a planted article.
fn printed_name(bank: &SynthBank, variant: u32) -> String {
    if !bank.national {
        return match variant % 2 {
            0 => bank.name.clone(),
            _ => format!("The {}", bank.name),
        };
    }
    let short = bank.name.trim_end_matches(&format!(" of {}", bank.city)).to_string();
    let stem = short.trim_end_matches(" National Bank");
    match variant % 5 {
        0 => bank.name.clone(),
        1 => format!("The {short}"),
        2 => format!("{stem} Natl Bank"),
        3 => format!("{stem} NB"),
        _ => short,
    }
}

fn planted_text(t: EventType, name: &str, bank: &SynthBank, d: NaiveDate) -> String {
    let when = long_date(d);
    let place = format!("{}, {}", bank.city.to_uppercase(), bank.state);
    let body = match t {
        EventType::Run => format!(
            "A run was started on the {name} on {when}. Depositors crowded the lobby all morning demanding their \
             money and the bank paid every check presented."
        ),
        EventType::Suspension => format!(
            "The {name} suspended payment on {when}. A notice on the door stated that the bank had closed \
             pending an examination of its affairs."
        ),
        EventType::PartialSuspension => format!(
            "On {when} the officers of the {name} announced that sixty days notice would be required before \
             savings deposits could be withdrawn."
        ),
        EventType::Failure => format!(
            "The {name} failed on {when}. The Comptroller has appointed a receiver and the bank will not be \
             opened again."
        ),
        EventType::Receivership => format!(
            "A receiver was named for the {name} on {when}. Depositors are advised to file their claims against \
             the bank with the receiver."
        ),
        EventType::Reopening => format!(
            "The {name}, which suspended some weeks ago, reopened for business on {when} and deposits at the \
             bank exceeded withdrawals during the day."
        ),
        EventType::Other => format!(
            "Heavy withdrawals were reported at the {name} on {when}. The cashier said the bank suffered a \
             temporary embarrassment only."
        ),
    };
    format!("{place}. {body}")
}

const DECOYS: [&str; 6] = [
    "The river bank gave way near the mill and the trains are running late on the north line.",
    "A great snow bank blocked the county road for two days.",
    "Mr. Albert Banks of this city returned from a visit to his brother.",
    "The schooner was beached on the river bank while the trains are running again.",
    "Bank loans to farmers were the subject of the grange meeting last evening.",
    "Counterfeit bank notes of the five dollar denomination are in circulation.",
];

const NEUTRAL: [&str; 6] = [
    "The city council met last evening to consider the paving of Main street.",
    "The county fair opened with a large attendance and fine weather.",
    "A new schoolhouse will be built in the fourth ward this summer.",
    "The price of wheat advanced two cents on the local market.",
    "The steamer arrived from the south with a cargo of lumber.",
    "The annual meeting of the horticultural society was held on Tuesday.",
];

fn random_date(rng: &mut ChaCha8Rng, from_year: i32, to_year: i32) -> NaiveDate {
    let lo = NaiveDate::from_ymd_opt(from_year, 1, 1).unwrap();
    let hi = NaiveDate::from_ymd_opt(to_year, 12, 31).unwrap();
    let span = (hi - lo).num_days();
    lo + Duration::days(rng.random_range(0..=span))
}

/// Position of an event type within a scripted episode.
fn script_rank(t: EventType) -> u8 {
    match t {
        EventType::Run => 0,
        EventType::Other => 1,
        EventType::PartialSuspension => 2,
        EventType::Suspension => 3,
        EventType::Reopening => 4,
        EventType::Failure => 5,
        EventType::Receivership => 6,
    }
}

/// Builds a corpus with `n_planted_events` articles that each report one
/// event at one bank, decoys that use only excluded phrases, and neutral
/// filler. Events are planted in short scripts of one to three events at a
/// single bank; each script uses a different bank.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<SynthCorpus, CorpusError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let banks = synthetic_banks();

    let mut types: Vec<EventType> = Vec::with_capacity(spec.n_planted_events);
    for (t, c) in spec.allocation() {
        types.extend(core::iter::repeat_n(t, c));
    }
    types.shuffle(&mut rng);

    let mut scripts: Vec<Vec<EventType>> = Vec::new();
    let mut i = 0;
    while i < types.len() {
        let len = rng.random_range(1..=3usize).min(types.len() - i);
        let mut s = types[i..i + len].to_vec();
        s.sort_by_key(|&t| script_rank(t));
        scripts.push(s);
        i += len;
    }
    if scripts.len() > banks.len() {
        return Err(CorpusError::InvalidSpec(format!("at most {} scripts fit the bank universe", banks.len())));
    }
    let chosen = rand::seq::index::sample(&mut rng, banks.len(), scripts.len());

    struct Draft {
        date: NaiveDate,
        text: String,
        state: String,
        city: String,
        newspaper: String,
        planted: Option<PlantedEvent>,
    }
    let mut drafts: Vec<Draft> = Vec::with_capacity(spec.n_articles);
    for (script, bank_idx) in scripts.iter().zip(chosen.iter()) {
        let bank = &banks[bank_idx];
        let mut d = random_date(&mut rng, 1865, 1932);
        for (k, &t) in script.iter().enumerate() {
            if k > 0 {
                d += Duration::days(rng.random_range(1..=45));
            }
            let name = printed_name(bank, rng.random_range(0..5));
            let published = d + Duration::days(rng.random_range(0..=2));
            let event = ArticleEvent {
                article_id: String::new(),
                bank_name_raw: name.clone(),
                state_raw: bank.state.clone(),
                city_raw: bank.city.clone(),
                event_type: t,
                event_date: d,
                date_precision: DatePrecision::Day,
                confidence: None,
            };
            drafts.push(Draft {
                date: published,
                text: planted_text(t, &name, bank, d),
                state: bank.state.clone(),
                city: bank.city.clone(),
                newspaper: format!("{} Daily Herald", bank.city),
                planted: Some(PlantedEvent { bank_key: bank.key.clone(), event }),
            });
        }
    }

    let n_decoys = libm::round(spec.noise_rate * spec.n_articles as f64) as usize;
    let n_decoys = n_decoys.min(spec.n_articles - spec.n_planted_events);
    for k in 0..spec.n_articles - spec.n_planted_events {
        let (city, state, _) = CITIES[rng.random_range(0..CITIES.len())];
        let text = if k < n_decoys {
            DECOYS[rng.random_range(0..DECOYS.len())]
        } else {
            NEUTRAL[rng.random_range(0..NEUTRAL.len())]
        };
        drafts.push(Draft {
            date: random_date(&mut rng, 1865, 1933),
            text: format!("{}. {text}", city.to_uppercase()),
            state: state.to_string(),
            city: city.to_string(),
            newspaper: format!("{city} Evening Star"),
            planted: None,
        });
    }
    drafts.shuffle(&mut rng);

    let mut articles = Vec::with_capacity(drafts.len());
    let mut planted = Vec::with_capacity(spec.n_planted_events);
    for (idx, d) in drafts.into_iter().enumerate() {
        let article_id = format!("syn-{:06}", idx + 1);
        if let Some(mut p) = d.planted {
            p.event.article_id = article_id.clone();
            planted.push(p);
        }
        articles.push(ArticleRecord {
            article_id,
            source: Source::Synthetic,
            publication_date: PartialDate::day(d.date),
            newspaper_name: d.newspaper,
            state_raw: d.state,
            city_raw: d.city,
            text: d.text,
            ocr_quality: None,
        });
    }
    let articles = build_collection(articles)?;
    planted.sort_by(|a, b| a.event.article_id.cmp(&b.event.article_id));
    Ok(SynthCorpus { articles, planted, banks })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, date: &str, text: &str) -> ArticleRecord {
        ArticleRecord {
            article_id: id.to_string(),
            source: Source::ChroniclingAmerica,
            publication_date: date.parse().unwrap(),
            newspaper_name: String::from("The Sun"),
            state_raw: String::new(),
            city_raw: String::new(),
            text: text.to_string(),
            ocr_quality: None,
        }
    }

    #[test]
    fn validation_rules() {
        assert_eq!(validate_article(rec("a", "1893-06-01", "   ")), Err(CorpusError::EmptyText("a".into())));
        assert!(matches!(
            validate_article(rec("a", "1776-07-04", "x")),
            Err(CorpusError::DateOutOfRange { .. })
        ));
        assert!(matches!(
            validate_article(rec("a", "1893-06-01", "bad \u{FFFD} byte")),
            Err(CorpusError::BadEncoding { .. })
        ));
        let v = validate_article(rec("a", "1907-10-22", "  run  on\nthe   bank ")).unwrap();
        assert_eq!(v.text, "run on the bank");
        assert_eq!(validate_article(v.clone().into_inner()).unwrap(), v);
    }

    #[test]
    fn duplicate_ids_are_named() {
        let r = build_collection(alloc::vec![rec("x", "1893-06-01", "a"), rec("x", "1893-06-02", "b")]);
        assert_eq!(r, Err(CorpusError::DuplicateId("x".into())));
    }

    #[test]
    fn collection_order() {
        let c = build_collection(alloc::vec![
            rec("b", "1893-06-01", "a"),
            rec("a", "1893-06-01", "a"),
            rec("c", "1890", "a")
        ])
        .unwrap();
        let ids: Vec<&str> = c.iter().map(|r| r.article_id.as_str()).collect();
        assert_eq!(ids, ["c", "a", "b"]);
    }

    #[test]
    fn allocation_sums() {
        let spec = SynthSpec { n_planted_events: 7, ..SynthSpec::default() };
        assert_eq!(spec.allocation().iter().map(|x| x.1).sum::<usize>(), 7);
    }

    #[test]
    fn empty_spec() {
        let s = generate_synthetic(&SynthSpec { n_articles: 0, n_planted_events: 0, ..SynthSpec::default() }).unwrap();
        assert!(s.articles.is_empty() && s.planted.is_empty());
    }

    #[test]
    fn planted_runs_counted() {
        let mut mix = BTreeMap::new();
        mix.insert(EventType::Run, 1.0);
        let spec = SynthSpec { n_articles: 40, n_planted_events: 10, event_mix: mix, noise_rate: 0.5, rng_seed: 9 };
        let s = generate_synthetic(&spec).unwrap();
        assert_eq!(s.planted.len(), 10);
        assert!(s.planted.iter().all(|p| p.event.event_type == EventType::Run));
        assert_eq!(s.articles.len(), 40);
    }

    #[test]
    fn bad_mix_rejected() {
        let mut mix = BTreeMap::new();
        mix.insert(EventType::Run, 0.5);
        let spec = SynthSpec { event_mix: mix, ..SynthSpec::default() };
        assert!(matches!(generate_synthetic(&spec), Err(CorpusError::InvalidSpec(_))));
    }
}
