//! Place and bank-name resolution.
//!
//! States map to FIPS codes, cities to a canonical gazetteer spelling, and
//! raw bank names to registry entries. Bank matching tries, in order, manual
//! overrides, the name crosswalk, exact normalized names, abbreviation
//! expansion, and finally a bounded Damerau–Levenshtein match. Candidates are
//! always restricted to the query's state and city.

pub mod distance;
pub mod gazetteer;
pub mod states;

pub use distance::{common_prefix_len, damerau_levenshtein};
pub use gazetteer::{city_key, default_city_crosswalk, CityCrosswalk, Gazetteer, GazetteerEntry, GazetteerReport};
pub use states::{normalize_state, state_code, state_name, StateMatch};

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::llmgate::ArticleEvent;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EntityError {
    #[error("unknown state {0:?}")]
    UnknownState(String),
    #[error("unknown city {raw:?}; nearest: {suggestions:?}")]
    UnknownCity { raw: String, suggestions: Vec<String> },
    #[error("duplicate bank_id {0}")]
    DuplicateBankId(String),
    #[error("banks {0} and {1} share a name in the same place and period")]
    DuplicateName(String, String),
    #[error("crosswalk entry for {0:?} points to unknown bank {1}")]
    DanglingCrosswalk(String, String),
    #[error("no results in the requested subset")]
    EmptySubset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CharterType {
    National,
    State,
    Private,
    Savings,
    Trust,
    #[default]
    Unknown,
}

impl CharterType {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "national" => Some(CharterType::National),
            "state" => Some(CharterType::State),
            "private" => Some(CharterType::Private),
            "savings" => Some(CharterType::Savings),
            "trust" => Some(CharterType::Trust),
            "unknown" | "" => Some(CharterType::Unknown),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CharterType::National => "national",
            CharterType::State => "state",
            CharterType::Private => "private",
            CharterType::Savings => "savings",
            CharterType::Trust => "trust",
            CharterType::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BankRecord {
    pub bank_id: String,
    pub canonical_name: String,
    pub state_fips: u8,
    pub canonical_city: String,
    #[serde(default)]
    pub charter_type: CharterType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_from: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_to: Option<NaiveDate>,
}

impl BankRecord {
    pub fn active_on(&self, d: NaiveDate) -> bool {
        self.active_from.is_none_or(|f| f <= d) && self.active_to.is_none_or(|t| d <= t)
    }

    fn overlaps(&self, other: &BankRecord) -> bool {
        let lo = self.active_from.max(other.active_from);
        let hi = match (self.active_to, other.active_to) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        match (lo, hi) {
            (Some(l), Some(h)) => l <= h,
            _ => true,
        }
    }
}

/// Raw name to canonical name. Without a place it applies in every place.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameCrosswalk {
    pub raw_name: String,
    pub canonical_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_fips: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub city: Option<String>,
}

/// A hand-made decision tying a raw name in one place to one bank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManualMatch {
    pub raw_name: String,
    pub state_fips: u8,
    pub city: String,
    pub bank_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMethod {
    Exact,
    Abbreviation,
    TypoTolerant,
    Crosswalk,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub bank_id: String,
    pub canonical_name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "outcome")]
pub enum MatchOutcome {
    Matched { bank_id: String, method: MatchMethod },
    Unmatched { best_candidates: Vec<Candidate> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    #[serde(flatten)]
    pub outcome: MatchOutcome,
    pub score: f64,
    /// Registry charter when matched; `national` for unmatched names that
    /// look national, else absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charter: Option<CharterType>,
    #[serde(default)]
    pub probable_national: bool,
}

impl MatchResult {
    pub fn bank_id(&self) -> Option<&str> {
        match &self.outcome {
            MatchOutcome::Matched { bank_id, .. } => Some(bank_id),
            MatchOutcome::Unmatched { .. } => None,
        }
    }

    pub fn method(&self) -> Option<MatchMethod> {
        match &self.outcome {
            MatchOutcome::Matched { method, .. } => Some(*method),
            MatchOutcome::Unmatched { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Minimum score for a typo-tolerant match.
    pub acceptance: f64,
    /// Edit budget is `max(min_edits, len / chars_per_edit)`.
    pub chars_per_edit: usize,
    pub min_edits: usize,
    pub max_suggestions: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { acceptance: 0.85, chars_per_edit: 8, min_edits: 1, max_suggestions: 3 }
    }
}

impl MatchConfig {
    pub fn edit_budget(&self, len: usize) -> usize {
        self.min_edits.max(len / self.chars_per_edit.max(1))
    }
}

const ABBREVIATIONS: [(&str, &[&str]); 18] = [
    ("nb", &["national", "bank"]),
    ("natl", &["national"]),
    ("nat", &["national"]),
    ("nationl", &["national"]),
    ("bk", &["bank"]),
    ("bnk", &["bank"]),
    ("co", &["company"]),
    ("tr", &["trust"]),
    ("sav", &["savings"]),
    ("svgs", &["savings"]),
    ("assn", &["association"]),
    ("mech", &["mechanics"]),
    ("mfrs", &["manufacturers"]),
    ("1st", &["first"]),
    ("2nd", &["second"]),
    ("3rd", &["third"]),
    ("4th", &["fourth"]),
    ("5th", &["fifth"]),
];

fn name_tokens(raw: &str) -> Vec<String> {
    let mut s = String::with_capacity(raw.len());
    for c in raw.chars() {
        match c {
            '\'' | '\u{2019}' | '.' => {}
            '&' => s.push_str(" and "),
            c if c.is_alphanumeric() => s.extend(c.to_lowercase()),
            _ => s.push(' '),
        }
    }
    s.split_whitespace().map(|w| w.to_string()).collect()
}

/// Lowercase, punctuation-free name.
pub fn exact_key(raw: &str) -> String {
    name_tokens(raw).join(" ")
}

/// Name with abbreviations expanded, a leading "the" dropped, and a trailing
/// "of <city>" or "at <city>" dropped.
pub fn expanded_key(raw: &str, city: &str) -> String {
    let mut toks: Vec<String> = Vec::new();
    for t in name_tokens(raw) {
        match ABBREVIATIONS.iter().find(|(a, _)| *a == t) {
            Some((_, exp)) => toks.extend(exp.iter().map(|s| s.to_string())),
            None => toks.push(t),
        }
    }
    if toks.first().is_some_and(|t| t == "the") {
        toks.remove(0);
    }
    let city_toks = name_tokens(city);
    if !city_toks.is_empty() && toks.len() > city_toks.len() + 1 {
        let k = toks.len() - city_toks.len();
        if toks[k..] == city_toks[..] && (toks[k - 1] == "of" || toks[k - 1] == "at") {
            toks.truncate(k - 1);
        }
    }
    toks.join(" ")
}

/// Banks with their normalized names, grouped by state. Immutable once built.
#[derive(Debug, Clone, Default)]
pub struct BankRegistry {
    banks: Vec<BankRecord>,
    by_id: BTreeMap<String, usize>,
    by_state: BTreeMap<u8, Vec<usize>>,
    exact: Vec<String>,
    expanded: Vec<String>,
    crosswalk: Vec<NameCrosswalk>,
    manual: BTreeMap<(String, u8, String), String>,
}

impl BankRegistry {
    pub fn new(banks: Vec<BankRecord>, crosswalk: Vec<NameCrosswalk>, manual: Vec<ManualMatch>) -> Result<Self, EntityError> {
        let mut by_id = BTreeMap::new();
        let mut by_state: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
        let mut seen_names: BTreeMap<(u8, String, String), Vec<usize>> = BTreeMap::new();
        for (i, b) in banks.iter().enumerate() {
            if by_id.insert(b.bank_id.clone(), i).is_some() {
                return Err(EntityError::DuplicateBankId(b.bank_id.clone()));
            }
            by_state.entry(b.state_fips).or_default().push(i);
            let slot = seen_names.entry((b.state_fips, city_key(&b.canonical_city), exact_key(&b.canonical_name))).or_default();
            for &j in slot.iter() {
                if banks[j].overlaps(b) {
                    return Err(EntityError::DuplicateName(banks[j].bank_id.clone(), b.bank_id.clone()));
                }
            }
            slot.push(i);
        }
        let exact = banks.iter().map(|b| exact_key(&b.canonical_name)).collect();
        let expanded = banks.iter().map(|b| expanded_key(&b.canonical_name, &b.canonical_city)).collect();
        let mut manual_map = BTreeMap::new();
        for m in manual {
            if !by_id.contains_key(&m.bank_id) {
                return Err(EntityError::DanglingCrosswalk(m.raw_name, m.bank_id));
            }
            manual_map.insert((exact_key(&m.raw_name), m.state_fips, city_key(&m.city)), m.bank_id);
        }
        Ok(Self { banks, by_id, by_state, exact, expanded, crosswalk, manual: manual_map })
    }

    pub fn banks(&self) -> &[BankRecord] {
        &self.banks
    }

    pub fn get(&self, bank_id: &str) -> Option<&BankRecord> {
        self.by_id.get(bank_id).map(|&i| &self.banks[i])
    }

    pub fn len(&self) -> usize {
        self.banks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.banks.is_empty()
    }

    fn candidates(&self, state_fips: u8, city: &str, as_of: Option<NaiveDate>, gaz: Option<&Gazetteer>) -> Vec<usize> {
        let ck = city_key(city);
        self.by_state
            .get(&state_fips)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
            .iter()
            .copied()
            .filter(|&i| {
                let b = &self.banks[i];
                let same_city = ck.is_empty()
                    || city_key(&b.canonical_city) == ck
                    || gaz.is_some_and(|g| g.is_crosswalk_alias(state_fips, city, &b.canonical_city));
                same_city && as_of.is_none_or(|d| b.active_on(d))
            })
            .collect()
    }

    fn matched(&self, i: usize, method: MatchMethod, score: f64) -> MatchResult {
        MatchResult {
            outcome: MatchOutcome::Matched { bank_id: self.banks[i].bank_id.clone(), method },
            score,
            charter: Some(self.banks[i].charter_type),
            probable_national: false,
        }
    }

    /// Among equally good candidates: longest common prefix with the query
    /// key, then the lexicographically smallest canonical name.
    fn pick(&self, pool: &[usize], query_key: &str, keys: &[String]) -> usize {
        *pool
            .iter()
            .min_by(|&&a, &&b| {
                common_prefix_len(query_key, &keys[b])
                    .cmp(&common_prefix_len(query_key, &keys[a]))
                    .then_with(|| self.banks[a].canonical_name.cmp(&self.banks[b].canonical_name))
                    .then(a.cmp(&b))
            })
            .expect("non-empty pool")
    }

    pub fn match_bank(
        &self,
        state_fips: u8,
        city: &str,
        raw_name: &str,
        as_of: Option<NaiveDate>,
        gaz: Option<&Gazetteer>,
        cfg: &MatchConfig,
    ) -> MatchResult {
        let pool = self.candidates(state_fips, city, as_of, gaz);
        let qx = exact_key(raw_name);

        if let Some(id) = self.manual.get(&(qx.clone(), state_fips, city_key(city))) {
            if let Some(&i) = self.by_id.get(id) {
                return self.matched(i, MatchMethod::Manual, 1.0);
            }
        }

        let cw: Vec<&NameCrosswalk> = self
            .crosswalk
            .iter()
            .filter(|c| {
                exact_key(&c.raw_name) == qx
                    && c.state_fips.is_none_or(|f| f == state_fips)
                    && c.city.as_deref().is_none_or(|x| city_key(x) == city_key(city))
            })
            .collect();
        for c in cw {
            let target = exact_key(&c.canonical_name);
            let hits: Vec<usize> = pool.iter().copied().filter(|&i| self.exact[i] == target).collect();
            if !hits.is_empty() {
                return self.matched(self.pick(&hits, &target, &self.exact), MatchMethod::Crosswalk, 1.0);
            }
        }

        let hits: Vec<usize> = pool.iter().copied().filter(|&i| self.exact[i] == qx).collect();
        if !hits.is_empty() {
            return self.matched(self.pick(&hits, &qx, &self.exact), MatchMethod::Exact, 1.0);
        }

        let qe = expanded_key(raw_name, city);
        let hits: Vec<usize> = pool.iter().copied().filter(|&i| self.expanded[i] == qe).collect();
        if !hits.is_empty() {
            return self.matched(self.pick(&hits, &qe, &self.expanded), MatchMethod::Abbreviation, 1.0);
        }

        let qlen = qe.chars().count();
        let budget = cfg.edit_budget(qlen);
        let mut scored: Vec<(usize, usize, f64)> = pool
            .iter()
            .map(|&i| {
                let d = damerau_levenshtein(&qe, &self.expanded[i]);
                let longest = qlen.max(self.expanded[i].chars().count()).max(1);
                (i, d, 1.0 - d as f64 / longest as f64)
            })
            .collect();
        scored.sort_by(|a, b| a.1.cmp(&b.1).then(b.2.total_cmp(&a.2)).then(a.0.cmp(&b.0)));
        if let Some(&(_, best_d, _)) = scored.first() {
            let ok: Vec<usize> = scored
                .iter()
                .filter(|&&(_, d, s)| d == best_d && d <= budget && s >= cfg.acceptance)
                .map(|&(i, _, _)| i)
                .collect();
            if !ok.is_empty() {
                let i = self.pick(&ok, &qe, &self.expanded);
                let score = scored.iter().find(|x| x.0 == i).unwrap().2;
                return self.matched(i, MatchMethod::TypoTolerant, score);
            }
        }

        let best_candidates: Vec<Candidate> = scored
            .iter()
            .take(cfg.max_suggestions)
            .map(|&(i, _, s)| Candidate {
                bank_id: self.banks[i].bank_id.clone(),
                canonical_name: self.banks[i].canonical_name.clone(),
                score: s,
            })
            .collect();
        let probable_national = qx.contains("nat") || qx.split(' ').any(|w| w == "nb");
        MatchResult {
            score: best_candidates.first().map(|c| c.score).unwrap_or(0.0),
            outcome: MatchOutcome::Unmatched { best_candidates },
            charter: probable_national.then_some(CharterType::National),
            probable_national,
        }
    }
}

/// Share of results that matched, optionally within one charter type.
pub fn match_rate(results: &[MatchResult], charter: Option<CharterType>) -> Result<f64, EntityError> {
    let subset: Vec<&MatchResult> = results.iter().filter(|r| charter.is_none_or(|c| r.charter == Some(c))).collect();
    if subset.is_empty() {
        return Err(EntityError::EmptySubset);
    }
    let hits = subset.iter().filter(|r| r.bank_id().is_some()).count();
    Ok(hits as f64 / subset.len() as f64)
}

/// An extracted event with its place and bank resolved where possible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedEvent {
    pub event: ArticleEvent,
    pub bank_id: Option<String>,
    #[serde(default)]
    pub charter: CharterType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_fips: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub city: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<MatchMethod>,
    #[serde(default)]
    pub score: f64,
    #[serde(default)]
    pub probable_national: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub problems: Vec<String>,
}

impl ResolvedEvent {
    pub fn new(event: ArticleEvent, bank_id: Option<String>, charter: CharterType) -> Self {
        Self {
            event,
            bank_id,
            charter,
            state_fips: None,
            city: None,
            method: None,
            score: 0.0,
            probable_national: false,
            problems: Vec::new(),
        }
    }
}

/// Resolves state, city and bank for one event. Falls back to the article's
/// place when the event does not name one. Never fails: problems are listed
/// on the result and the bank stays unresolved.
pub fn resolve_event(
    event: &ArticleEvent,
    article_place: (&str, &str),
    registry: &BankRegistry,
    gaz: &Gazetteer,
    cfg: &MatchConfig,
) -> ResolvedEvent {
    let mut out = ResolvedEvent::new(event.clone(), None, CharterType::Unknown);
    let state_raw = if event.state_raw.trim().is_empty() { article_place.0 } else { &event.state_raw };
    let city_raw = if event.city_raw.trim().is_empty() { article_place.1 } else { &event.city_raw };
    let states = match normalize_state(state_raw) {
        Ok(m) => m,
        Err(e) => {
            out.problems.push(e.to_string());
            return out;
        }
    };
    let (fips, city) = match states.unique() {
        Some(f) => match gaz.normalize_city(f, city_raw) {
            Ok(c) => (f, c),
            Err(e) => {
                out.problems.push(e.to_string());
                out.state_fips = Some(f);
                return out;
            }
        },
        None => match gaz.disambiguate_state(&states.candidates, city_raw) {
            Some(x) => x,
            None => {
                out.problems.push(format!("state {state_raw:?} is ambiguous for city {city_raw:?}"));
                return out;
            }
        },
    };
    out.state_fips = Some(fips);
    out.city = Some(city.clone());
    let m = registry.match_bank(fips, &city, &event.bank_name_raw, Some(event.event_date), Some(gaz), cfg);
    out.score = m.score;
    out.probable_national = m.probable_national;
    match m.outcome {
        MatchOutcome::Matched { bank_id, method } => {
            out.charter = m.charter.unwrap_or_default();
            out.method = Some(method);
            out.bank_id = Some(bank_id);
        }
        MatchOutcome::Unmatched { best_candidates } => {
            let names: BTreeSet<&str> = best_candidates.iter().map(|c| c.canonical_name.as_str()).collect();
            out.problems.push(format!("no bank matched {:?}; nearest: {names:?}", event.bank_name_raw));
        }
    }
    out
}
