//! Distress episodes: per-bank clusters of events, their types, the merge with
//! receivership records, and count tables.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::corpus::ArticleRecord;
use crate::entities::{CharterType, ResolvedEvent};
use crate::llmgate::{ArticleEvent, EventType, ResponseFlags, TriState};

/// Maximum gap, in days, between consecutive events of one episode.
pub const EPISODE_GAP_DAYS: i64 = 365;
pub const DEFAULT_OCC_WINDOW_DAYS: i64 = 90;
pub const MAX_OCC_WINDOW_DAYS: i64 = 540;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeType {
    RunOnly,
    RunSuspensionReopening,
    RunSuspensionFailure,
    FailureWithoutRun,
    SuspensionWithoutRunOrFailure,
    #[default]
    Other,
}

impl EpisodeType {
    pub const ALL: [EpisodeType; 6] = [
        EpisodeType::RunOnly,
        EpisodeType::RunSuspensionReopening,
        EpisodeType::RunSuspensionFailure,
        EpisodeType::FailureWithoutRun,
        EpisodeType::SuspensionWithoutRunOrFailure,
        EpisodeType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EpisodeType::RunOnly => "run_only",
            EpisodeType::RunSuspensionReopening => "run_suspension_reopening",
            EpisodeType::RunSuspensionFailure => "run_suspension_failure",
            EpisodeType::FailureWithoutRun => "failure_without_run",
            EpisodeType::SuspensionWithoutRunOrFailure => "suspension_without_run_or_failure",
            EpisodeType::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for EpisodeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EpisodeError {
    #[error("event from article {0} has no resolved bank")]
    UnresolvedBank(String),
    #[error("episode {0}: failure without any suspension and no receivership record")]
    InconsistentEvents(String),
    #[error("no denominator for year {0}")]
    MissingDenominator(i32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistressEpisode {
    pub episode_id: String,
    pub bank_id: String,
    #[serde(default)]
    pub charter: CharterType,
    pub events: Vec<ArticleEvent>,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    #[serde(default)]
    pub episode_type: EpisodeType,
    pub has_run: bool,
    /// Also true when the bank failed: a bank suspends at or before failure.
    pub has_suspension: bool,
    pub has_failure: bool,
    #[serde(default)]
    pub has_reopening: bool,
    #[serde(default)]
    pub response_flags: ResponseFlags,
    #[serde(default)]
    pub nonfundamental: TriState,
    #[serde(default)]
    pub needs_review: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub review_reasons: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occ_confirmed_failure: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receivership_date: Option<NaiveDate>,
    #[serde(default)]
    pub newspaper_silent: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub narrative: Option<String>,
}

impl DistressEpisode {
    fn new(bank_id: &str, charter: CharterType, mut events: Vec<ArticleEvent>) -> Self {
        events.sort_by(event_order);
        let start = events.first().map(|e| e.event_date).unwrap_or(NaiveDate::MIN);
        let end = events.last().map(|e| e.event_date).unwrap_or(start);
        let mut ep = Self {
            episode_id: episode_id(bank_id, start),
            bank_id: bank_id.to_string(),
            charter,
            events,
            start_date: start,
            end_date: end,
            episode_type: EpisodeType::Other,
            has_run: false,
            has_suspension: false,
            has_failure: false,
            has_reopening: false,
            response_flags: ResponseFlags::default(),
            nonfundamental: TriState::Unclear,
            needs_review: false,
            review_reasons: Vec::new(),
            occ_confirmed_failure: None,
            receivership_date: None,
            newspaper_silent: false,
            narrative: None,
        };
        ep.refresh_flags();
        ep
    }

    /// Recomputes the `has_*` flags from the events and the receivership match.
    pub fn refresh_flags(&mut self) {
        let any = |f: fn(EventType) -> bool| self.events.iter().any(|e| f(e.event_type));
        self.has_run = any(|t| t == EventType::Run);
        self.has_failure = any(EventType::is_failure) || self.occ_confirmed_failure == Some(true);
        self.has_suspension = any(EventType::is_suspension) || self.has_failure;
        self.has_reopening = any(|t| t == EventType::Reopening);
    }

    pub fn first_date_of(&self, pred: impl Fn(EventType) -> bool) -> Option<NaiveDate> {
        self.events.iter().filter(|e| pred(e.event_type)).map(|e| e.event_date).min()
    }

    pub fn first_run_date(&self) -> Option<NaiveDate> {
        self.first_date_of(|t| t == EventType::Run)
    }

    /// Receivership record date when known, else the first failure event.
    pub fn failure_date(&self) -> Option<NaiveDate> {
        if !self.has_failure {
            return None;
        }
        self.receivership_date.or_else(|| self.first_date_of(EventType::is_failure)).or(Some(self.start_date))
    }

    pub fn flag_review(&mut self, reason: &str) {
        self.needs_review = true;
        if !self.review_reasons.iter().any(|r| r == reason) {
            self.review_reasons.push(reason.to_string());
        }
    }
}

pub fn episode_id(bank_id: &str, start: NaiveDate) -> String {
    format!("{bank_id}:{}", start.format("%Y-%m-%d"))
}

/// Total order on events so that grouping does not depend on input order.
fn event_order(a: &ArticleEvent, b: &ArticleEvent) -> core::cmp::Ordering {
    (a.event_date, a.event_type, &a.article_id, &a.bank_name_raw, &a.state_raw, &a.city_raw, a.date_precision)
        .cmp(&(b.event_date, b.event_type, &b.article_id, &b.bank_name_raw, &b.state_raw, &b.city_raw, b.date_precision))
        .then_with(|| {
            let ka = a.confidence.map(f64::to_bits);
            let kb = b.confidence.map(f64::to_bits);
            ka.cmp(&kb)
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "days")]
pub enum GroupingRule {
    /// New episode when the gap to the previous event exceeds the bound.
    ChainGap(i64),
    /// New episode when the span from the episode's first event exceeds the bound.
    TotalSpan(i64),
}

impl Default for GroupingRule {
    fn default() -> Self {
        GroupingRule::ChainGap(EPISODE_GAP_DAYS)
    }
}

/// Splits resolved events into per-bank episodes. Episodes are ordered by
/// (bank_id, start date).
pub fn group_events(events: &[ResolvedEvent], rule: GroupingRule) -> Result<Vec<DistressEpisode>, EpisodeError> {
    let mut by_bank: BTreeMap<&str, (CharterType, Vec<ArticleEvent>)> = BTreeMap::new();
    for r in events {
        let bank = r.bank_id.as_deref().filter(|b| !b.is_empty());
        let bank = bank.ok_or_else(|| EpisodeError::UnresolvedBank(r.event.article_id.clone()))?;
        let slot = by_bank.entry(bank).or_insert_with(|| (r.charter, Vec::new()));
        slot.0 = slot.0.min(r.charter);
        slot.1.push(r.event.clone());
    }
    let mut out = Vec::new();
    for (bank, (charter, mut evs)) in by_bank {
        evs.sort_by(event_order);
        let mut current: Vec<ArticleEvent> = Vec::new();
        for e in evs {
            let split = match (current.first(), current.last(), rule) {
                (Some(_), Some(last), GroupingRule::ChainGap(g)) => (e.event_date - last.event_date).num_days() > g,
                (Some(first), Some(_), GroupingRule::TotalSpan(g)) => (e.event_date - first.event_date).num_days() > g,
                _ => false,
            };
            if split {
                out.push(DistressEpisode::new(bank, charter, core::mem::take(&mut current)));
            }
            current.push(e);
        }
        if !current.is_empty() {
            out.push(DistressEpisode::new(bank, charter, current));
        }
    }
    Ok(out)
}

/// Type implied by the flags. Total on every flag combination.
pub fn type_from_flags(has_run: bool, has_suspension: bool, has_failure: bool) -> EpisodeType {
    match (has_run, has_suspension, has_failure) {
        (true, _, true) => EpisodeType::RunSuspensionFailure,
        (true, true, false) => EpisodeType::RunSuspensionReopening,
        (true, false, false) => EpisodeType::RunOnly,
        (false, _, true) => EpisodeType::FailureWithoutRun,
        (false, true, false) => EpisodeType::SuspensionWithoutRunOrFailure,
        (false, false, false) => EpisodeType::Other,
    }
}

/// Episode type from the (possibly receivership-merged) episode.
pub fn classify_episode(ep: &DistressEpisode) -> Result<EpisodeType, EpisodeError> {
    let failure_event = ep.events.iter().any(|e| e.event_type.is_failure());
    let suspension_event = ep.events.iter().any(|e| e.event_type.is_suspension());
    if failure_event && !suspension_event && ep.occ_confirmed_failure != Some(true) {
        return Err(EpisodeError::InconsistentEvents(ep.episode_id.clone()));
    }
    let has_failure = failure_event || ep.occ_confirmed_failure == Some(true);
    Ok(type_from_flags(
        ep.events.iter().any(|e| e.event_type == EventType::Run),
        suspension_event || has_failure,
        has_failure,
    ))
}

/// Classifies in place. Inconsistent episodes become `other` and are flagged
/// for review instead of aborting the batch.
pub fn classify_all(episodes: &mut [DistressEpisode]) -> usize {
    let mut flagged = 0;
    for ep in episodes.iter_mut() {
        ep.refresh_flags();
        match classify_episode(ep) {
            Ok(t) => ep.episode_type = t,
            Err(_) => {
                ep.episode_type = EpisodeType::Other;
                ep.flag_review("failure reported without suspension and without receivership record");
                flagged += 1;
            }
        }
    }
    flagged
}

/// A national-bank receivership.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccRecord {
    pub bank_id: String,
    pub receivership_date: NaiveDate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deposits_at_suspension: Option<f64>,
    #[serde(default)]
    pub outcome: String,
}

/// Marks national-bank episodes confirmed when a receivership falls within
/// `window_days` of the episode interval; each record confirms at most one
/// episode, the nearest. Records left over become newspaper-silent
/// failure episodes. Nothing is removed.
pub fn merge_occ(mut episodes: Vec<DistressEpisode>, records: &[OccRecord], window_days: i64) -> Vec<DistressEpisode> {
    let w = Duration::days(window_days.clamp(0, MAX_OCC_WINDOW_DAYS));
    for ep in episodes.iter_mut() {
        if ep.charter == CharterType::National && !ep.newspaper_silent {
            ep.occ_confirmed_failure = Some(false);
        }
    }
    let mut sorted: Vec<&OccRecord> = records.iter().collect();
    sorted.sort_by(|a, b| (&a.bank_id, a.receivership_date).cmp(&(&b.bank_id, b.receivership_date)));
    let mut extra = Vec::new();
    for rec in sorted {
        let distance = |ep: &DistressEpisode| -> i64 {
            if rec.receivership_date < ep.start_date {
                (ep.start_date - rec.receivership_date).num_days()
            } else if rec.receivership_date > ep.end_date {
                (rec.receivership_date - ep.end_date).num_days()
            } else {
                0
            }
        };
        let best = episodes
            .iter()
            .enumerate()
            .filter(|(_, ep)| {
                ep.bank_id == rec.bank_id
                    && ep.charter == CharterType::National
                    && ep.occ_confirmed_failure == Some(false)
                    && rec.receivership_date >= ep.start_date - w
                    && rec.receivership_date <= ep.end_date + w
            })
            .min_by_key(|(i, ep)| (distance(ep), *i))
            .map(|(i, _)| i);
        match best {
            Some(i) => {
                let ep = &mut episodes[i];
                ep.occ_confirmed_failure = Some(true);
                ep.receivership_date = Some(rec.receivership_date);
                ep.refresh_flags();
            }
            None => {
                let mut ep = DistressEpisode::new(&rec.bank_id, CharterType::National, Vec::new());
                ep.episode_id = format!("{}:occ:{}", rec.bank_id, rec.receivership_date.format("%Y-%m-%d"));
                ep.start_date = rec.receivership_date;
                ep.end_date = rec.receivership_date;
                ep.occ_confirmed_failure = Some(true);
                ep.receivership_date = Some(rec.receivership_date);
                ep.newspaper_silent = true;
                ep.refresh_flags();
                ep.episode_type = EpisodeType::FailureWithoutRun;
                extra.push(ep);
            }
        }
    }
    episodes.extend(extra);
    episodes.sort_by(|a, b| (&a.bank_id, a.start_date, &a.episode_id).cmp(&(&b.bank_id, b.start_date, &b.episode_id)));
    episodes
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Era {
    NationalBanking,
    EarlyFed,
    Depression,
    PostHoliday,
}

impl Era {
    pub const ALL: [Era; 4] = [Era::NationalBanking, Era::EarlyFed, Era::Depression, Era::PostHoliday];

    pub fn label(self) -> &'static str {
        match self {
            Era::NationalBanking => "1863-1913 (NB Era)",
            Era::EarlyFed => "1914-1928 (Early Fed)",
            Era::Depression => "1929-March 6, 1933",
            Era::PostHoliday => "After March 6, 1933",
        }
    }

    /// Era of a date. Dates before 1863 belong to none.
    pub fn of(d: NaiveDate) -> Option<Era> {
        let holiday = NaiveDate::from_ymd_opt(1933, 3, 6).unwrap();
        match d.year() {
            ..=1862 => None,
            1863..=1913 => Some(Era::NationalBanking),
            1914..=1928 => Some(Era::EarlyFed),
            _ if d <= holiday => Some(Era::Depression),
            _ => Some(Era::PostHoliday),
        }
    }
}

/// Banking-crisis years used for the crisis split when none are configured.
pub const DEFAULT_CRISIS_YEARS: [i32; 9] = [1873, 1884, 1890, 1893, 1907, 1930, 1931, 1932, 1933];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TabulateFilter {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub era: Option<Era>,
    /// `Some(true)` keeps crisis years only, `Some(false)` the others.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crisis: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charter: Option<CharterType>,
}

impl TabulateFilter {
    pub fn admits(&self, ep: &DistressEpisode, crisis_years: &BTreeSet<i32>) -> bool {
        self.admits_date(ep.start_date, crisis_years) && self.charter.is_none_or(|c| c == ep.charter)
    }

    fn admits_date(&self, d: NaiveDate, crisis_years: &BTreeSet<i32>) -> bool {
        self.era.is_none_or(|e| Era::of(d) == Some(e)) && self.crisis.is_none_or(|c| crisis_years.contains(&d.year()) == c)
    }
}

/// One row of a counts table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub runs: u64,
    pub run_only: u64,
    pub run_suspension_reopening: u64,
    pub run_suspension_failure: u64,
    pub failures: u64,
    pub failure_without_run: u64,
    pub suspensions: u64,
    pub suspension_only: u64,
}

impl Counts {
    pub const HEADER: [&'static str; 8] = [
        "runs",
        "run_only",
        "run_suspension_reopening",
        "run_suspension_failure",
        "failures",
        "failure_without_run",
        "suspensions",
        "suspension_only",
    ];

    pub fn as_array(&self) -> [u64; 8] {
        [
            self.runs,
            self.run_only,
            self.run_suspension_reopening,
            self.run_suspension_failure,
            self.failures,
            self.failure_without_run,
            self.suspensions,
            self.suspension_only,
        ]
    }

    fn add(&mut self, ep: &DistressEpisode) {
        self.runs += ep.has_run as u64;
        self.failures += ep.has_failure as u64;
        self.suspensions += ep.has_suspension as u64;
        match ep.episode_type {
            EpisodeType::RunOnly => self.run_only += 1,
            EpisodeType::RunSuspensionReopening => self.run_suspension_reopening += 1,
            EpisodeType::RunSuspensionFailure => self.run_suspension_failure += 1,
            EpisodeType::FailureWithoutRun => self.failure_without_run += 1,
            EpisodeType::SuspensionWithoutRunOrFailure => self.suspension_only += 1,
            EpisodeType::Other => {}
        }
    }
}

/// Counts of classified episodes in one filter cell; episodes are placed by
/// start date.
pub fn tabulate(episodes: &[DistressEpisode], filter: &TabulateFilter, crisis_years: &BTreeSet<i32>) -> Counts {
    let mut c = Counts::default();
    for ep in episodes.iter().filter(|e| filter.admits(e, crisis_years)) {
        c.add(ep);
    }
    c
}

/// Counts per calendar year of episode start.
pub fn tabulate_by_year(episodes: &[DistressEpisode], filter: &TabulateFilter, crisis_years: &BTreeSet<i32>) -> BTreeMap<i32, Counts> {
    let mut out: BTreeMap<i32, Counts> = BTreeMap::new();
    for ep in episodes.iter().filter(|e| filter.admits(e, crisis_years)) {
        out.entry(ep.start_date.year()).or_default().add(ep);
    }
    out
}

/// Average over the cell's years of `count / banks`, in events per 100
/// banks. Years in `denominators` that the filter admits are averaged,
/// including years without events; a year with events but no denominator is
/// an error.
pub fn tabulate_rates(
    episodes: &[DistressEpisode],
    filter: &TabulateFilter,
    crisis_years: &BTreeSet<i32>,
    denominators: &BTreeMap<i32, u64>,
) -> Result<[f64; 8], EpisodeError> {
    let by_year = tabulate_by_year(episodes, filter, crisis_years);
    for y in by_year.keys() {
        if denominators.get(y).is_none_or(|&n| n == 0) {
            return Err(EpisodeError::MissingDenominator(*y));
        }
    }
    let years: Vec<(i32, u64)> = denominators
        .iter()
        .filter(|(&y, &n)| n > 0 && year_admitted(filter, y, crisis_years))
        .map(|(&y, &n)| (y, n))
        .collect();
    let mut sums = [0.0f64; 8];
    if years.is_empty() {
        return Ok(sums);
    }
    for &(y, n) in &years {
        let c = by_year.get(&y).copied().unwrap_or_default().as_array();
        for (s, v) in sums.iter_mut().zip(c) {
            *s += 100.0 * v as f64 / n as f64;
        }
    }
    for s in sums.iter_mut() {
        *s /= years.len() as f64;
    }
    Ok(sums)
}

/// Whether any day of year `y` falls in the filter's era and crisis cell.
fn year_admitted(filter: &TabulateFilter, y: i32, crisis_years: &BTreeSet<i32>) -> bool {
    let jan = NaiveDate::from_ymd_opt(y, 1, 1).unwrap();
    let dec = NaiveDate::from_ymd_opt(y, 12, 31).unwrap();
    filter.admits_date(jan, crisis_years) || filter.admits_date(dec, crisis_years)
}

/// The standard layout: all, no crisis, crisis, then each era.
pub fn standard_rows(crisis_years: &BTreeSet<i32>, charter: Option<CharterType>) -> Vec<(String, TabulateFilter)> {
    let _ = crisis_years;
    let mut rows = alloc::vec![
        (String::from("All"), TabulateFilter { charter, ..Default::default() }),
        (String::from("No crisis"), TabulateFilter { crisis: Some(false), charter, ..Default::default() }),
        (String::from("Banking crisis"), TabulateFilter { crisis: Some(true), charter, ..Default::default() }),
    ];
    for e in Era::ALL {
        rows.push((e.label().to_string(), TabulateFilter { era: Some(e), charter, ..Default::default() }));
    }
    rows
}

/// Counts table as CSV text with a fixed header and `\n` line endings.
pub fn counts_csv(rows: &[(String, Counts)]) -> String {
    let mut s = String::from("sample");
    for h in Counts::HEADER {
        s.push(',');
        s.push_str(h);
    }
    s.push('\n');
    for (label, c) in rows {
        s.push_str(&csv_field(label));
        for v in c.as_array() {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    s
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Which articles to keep when an episode has more than the per-call cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionPolicy {
    /// Longest text first, ties by earliest date, then id.
    #[default]
    LongestFirst,
    EarliestFirst,
}

/// Picks at most `cap` articles, returned in (date, id) order.
pub fn select_articles(articles: &[ArticleRecord], cap: usize, policy: SelectionPolicy) -> Vec<ArticleRecord> {
    let mut idx: Vec<usize> = (0..articles.len()).collect();
    match policy {
        SelectionPolicy::LongestFirst => idx.sort_by(|&a, &b| {
            let (x, y) = (&articles[a], &articles[b]);
            y.text
                .chars()
                .count()
                .cmp(&x.text.chars().count())
                .then(x.publication_date.cmp(&y.publication_date))
                .then(x.article_id.cmp(&y.article_id))
        }),
        SelectionPolicy::EarliestFirst => idx.sort_by(|&a, &b| {
            let (x, y) = (&articles[a], &articles[b]);
            x.publication_date.cmp(&y.publication_date).then(x.article_id.cmp(&y.article_id))
        }),
    }
    idx.truncate(cap);
    let mut out: Vec<ArticleRecord> = idx.into_iter().map(|i| articles[i].clone()).collect();
    out.sort_by(|a, b| a.publication_date.cmp(&b.publication_date).then(a.article_id.cmp(&b.article_id)));
    out
}

/// One cell of a compact episode fixture: `count` episodes of one type
/// starting in the given years, spread round-robin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureCell {
    pub era: Era,
    pub crisis: bool,
    pub episode_type: EpisodeType,
    pub count: u64,
}

/// Expands cells into classified episodes whose start dates fall in the
/// cell's era and crisis status.
pub fn expand_fixture(cells: &[FixtureCell], crisis_years: &BTreeSet<i32>) -> Result<Vec<DistressEpisode>, String> {
    let mut out = Vec::new();
    let mut serial = 0u64;
    for cell in cells {
        let dates: Vec<NaiveDate> = (1863..=1934)
            .flat_map(|y| {
                [NaiveDate::from_ymd_opt(y, 2, 15).unwrap(), NaiveDate::from_ymd_opt(y, 6, 15).unwrap()]
            })
            .filter(|&d| Era::of(d) == Some(cell.era) && crisis_years.contains(&d.year()) == cell.crisis)
            .fold(Vec::new(), |mut acc: Vec<NaiveDate>, d| {
                if acc.last().is_none_or(|l| l.year() != d.year() || Era::of(*l) != Era::of(d)) {
                    acc.push(d);
                }
                acc
            });
        if dates.is_empty() && cell.count > 0 {
            return Err(format!("no year is both in {:?} and crisis={}", cell.era, cell.crisis));
        }
        for k in 0..cell.count {
            serial += 1;
            let d = dates[(k % dates.len() as u64) as usize];
            out.push(fixture_episode(serial, d, cell.episode_type));
        }
    }
    Ok(out)
}

fn fixture_episode(serial: u64, d: NaiveDate, t: EpisodeType) -> DistressEpisode {
    let bank = format!("fx{serial:06}");
    let ev = |t: EventType, off: i64| ArticleEvent {
        article_id: format!("fx{serial:06}-{}", t.as_str()),
        bank_name_raw: format!("Fixture Bank {serial}"),
        state_raw: String::new(),
        city_raw: String::new(),
        event_type: t,
        event_date: d + Duration::days(off),
        date_precision: crate::dates::DatePrecision::Day,
        confidence: None,
    };
    let events = match t {
        EpisodeType::RunOnly => alloc::vec![ev(EventType::Run, 0)],
        EpisodeType::RunSuspensionReopening => {
            alloc::vec![ev(EventType::Run, 0), ev(EventType::Suspension, 1), ev(EventType::Reopening, 20)]
        }
        EpisodeType::RunSuspensionFailure => {
            alloc::vec![ev(EventType::Run, 0), ev(EventType::Suspension, 1), ev(EventType::Receivership, 10)]
        }
        EpisodeType::FailureWithoutRun => alloc::vec![ev(EventType::Suspension, 0), ev(EventType::Receivership, 10)],
        EpisodeType::SuspensionWithoutRunOrFailure => alloc::vec![ev(EventType::Suspension, 0)],
        EpisodeType::Other => alloc::vec![ev(EventType::Other, 0)],
    };
    let mut ep = DistressEpisode::new(&bank, CharterType::Unknown, events);
    ep.episode_type = classify_episode(&ep).unwrap_or(EpisodeType::Other);
    ep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dates::DatePrecision;

    fn ev(id: &str, t: EventType, day: i64) -> ArticleEvent {
        ArticleEvent {
            article_id: id.to_string(),
            bank_name_raw: String::from("First National Bank"),
            state_raw: String::new(),
            city_raw: String::new(),
            event_type: t,
            event_date: NaiveDate::from_ymd_opt(1893, 1, 1).unwrap() + Duration::days(day),
            date_precision: DatePrecision::Day,
            confidence: None,
        }
    }

    fn res(bank: &str, e: ArticleEvent) -> ResolvedEvent {
        ResolvedEvent::new(e, Some(bank.to_string()), CharterType::National)
    }

    fn one(events: &[(EventType, i64)]) -> DistressEpisode {
        let evs: Vec<ArticleEvent> = events.iter().enumerate().map(|(i, &(t, d))| ev(&format!("a{i}"), t, d)).collect();
        DistressEpisode::new("b", CharterType::State, evs)
    }

    #[test]
    fn gap_boundaries() {
        let g = |days: &[i64]| {
            let evs: Vec<ResolvedEvent> =
                days.iter().enumerate().map(|(i, &d)| res("b", ev(&format!("a{i}"), EventType::Run, d))).collect();
            group_events(&evs, GroupingRule::default()).unwrap().len()
        };
        assert_eq!(g(&[0, 365]), 1);
        assert_eq!(g(&[0, 366]), 2);
        assert_eq!(g(&[0, 300, 650]), 1);
    }

    #[test]
    fn total_span_switch() {
        let evs: Vec<ResolvedEvent> =
            [0, 300, 650].iter().enumerate().map(|(i, &d)| res("b", ev(&format!("a{i}"), EventType::Run, d))).collect();
        assert_eq!(group_events(&evs, GroupingRule::TotalSpan(365)).unwrap().len(), 2);
    }

    #[test]
    fn unresolved_bank() {
        let r = ResolvedEvent::new(ev("a", EventType::Run, 0), None, CharterType::Unknown);
        assert_eq!(group_events(&[r], GroupingRule::default()), Err(EpisodeError::UnresolvedBank("a".into())));
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify_episode(&one(&[(EventType::Run, 0)])), Ok(EpisodeType::RunOnly));
        assert_eq!(
            classify_episode(&one(&[(EventType::Run, 0), (EventType::Suspension, 1), (EventType::Reopening, 30)])),
            Ok(EpisodeType::RunSuspensionReopening)
        );
        assert_eq!(
            classify_episode(&one(&[(EventType::Suspension, 0), (EventType::Receivership, 10)])),
            Ok(EpisodeType::FailureWithoutRun)
        );
        assert!(matches!(
            classify_episode(&one(&[(EventType::Run, 0), (EventType::Failure, 5)])),
            Err(EpisodeError::InconsistentEvents(_))
        ));
    }

    #[test]
    fn classification_is_exhaustive_and_exclusive() {
        for bits in 0..16u8 {
            let (run, susp, fail, reopen) = (bits & 1 != 0, bits & 2 != 0, bits & 4 != 0, bits & 8 != 0);
            let mut evs = Vec::new();
            if run {
                evs.push((EventType::Run, 0));
            }
            if susp {
                evs.push((EventType::Suspension, 1));
            }
            if fail {
                evs.push((EventType::Receivership, 2));
            }
            if reopen {
                evs.push((EventType::Reopening, 3));
            }
            let ep = one(&evs);
            let got = classify_episode(&ep);
            if fail && !susp {
                assert!(got.is_err());
                continue;
            }
            let t = got.unwrap();
            let expected = [
                (run && !susp && !fail, EpisodeType::RunOnly),
                (run && susp && !fail, EpisodeType::RunSuspensionReopening),
                (run && fail, EpisodeType::RunSuspensionFailure),
                (!run && fail, EpisodeType::FailureWithoutRun),
                (!run && susp && !fail, EpisodeType::SuspensionWithoutRunOrFailure),
                (!run && !susp && !fail, EpisodeType::Other),
            ];
            assert_eq!(expected.iter().filter(|(c, _)| *c).count(), 1);
            assert_eq!(expected.iter().find(|(c, _)| *c).unwrap().1, t);
            assert!(!ep.has_failure || ep.has_suspension);
        }
    }

    fn national(events: &[(EventType, i64)]) -> DistressEpisode {
        let mut e = one(events);
        e.charter = CharterType::National;
        e
    }

    fn occ(bank: &str, day: i64) -> OccRecord {
        OccRecord {
            bank_id: bank.to_string(),
            receivership_date: NaiveDate::from_ymd_opt(1893, 1, 1).unwrap() + Duration::days(day),
            deposits_at_suspension: None,
            outcome: String::new(),
        }
    }

    #[test]
    fn occ_merge() {
        let eps = merge_occ(alloc::vec![national(&[(EventType::Run, 0), (EventType::Suspension, 5)])], &[occ("b", 15)], 90);
        assert_eq!(eps.len(), 1);
        assert_eq!(eps[0].occ_confirmed_failure, Some(true));
        assert!(eps[0].has_failure);
        assert_eq!(classify_episode(&eps[0]), Ok(EpisodeType::RunSuspensionFailure));

        let eps = merge_occ(Vec::new(), &[occ("z", 0)], 90);
        assert_eq!(eps.len(), 1);
        assert!(eps[0].newspaper_silent);
        assert_eq!(eps[0].episode_type, EpisodeType::FailureWithoutRun);

        let eps = merge_occ(alloc::vec![one(&[(EventType::Run, 0)])], &[], 90);
        assert_eq!(eps[0].occ_confirmed_failure, None);

        let far = merge_occ(alloc::vec![national(&[(EventType::Run, 0)])], &[occ("b", 200)], 90);
        assert_eq!(far.len(), 2);
        assert_eq!(far.iter().filter(|e| e.newspaper_silent).count(), 1);
    }

    #[test]
    fn era_bounds() {
        let d = |y, m, dd| NaiveDate::from_ymd_opt(y, m, dd).unwrap();
        assert_eq!(Era::of(d(1862, 12, 31)), None);
        assert_eq!(Era::of(d(1863, 1, 1)), Some(Era::NationalBanking));
        assert_eq!(Era::of(d(1928, 12, 31)), Some(Era::EarlyFed));
        assert_eq!(Era::of(d(1933, 3, 6)), Some(Era::Depression));
        assert_eq!(Era::of(d(1933, 3, 7)), Some(Era::PostHoliday));
    }

    #[test]
    fn empty_table_is_zero() {
        let cy: BTreeSet<i32> = DEFAULT_CRISIS_YEARS.into_iter().collect();
        assert_eq!(tabulate(&[], &TabulateFilter::default(), &cy), Counts::default());
    }

    #[test]
    fn rates_hand_computed() {
        let cy: BTreeSet<i32> = BTreeSet::new();
        let mk = |y: i32| {
            let mut e = one(&[(EventType::Run, 0)]);
            e.start_date = NaiveDate::from_ymd_opt(y, 5, 1).unwrap();
            e.episode_type = EpisodeType::RunOnly;
            e
        };
        let eps = alloc::vec![mk(1890), mk(1890), mk(1891)];
        let mut den = BTreeMap::new();
        den.insert(1890, 200u64);
        den.insert(1891, 400u64);
        den.insert(1892, 100u64);
        let r = tabulate_rates(&eps, &TabulateFilter::default(), &cy, &den).unwrap();
        // (2/200 + 1/400 + 0/100) / 3 * 100
        assert!((r[0] - (1.0 + 0.25 + 0.0) / 3.0).abs() < 1e-12);
        den.remove(&1891);
        assert_eq!(
            tabulate_rates(&eps, &TabulateFilter::default(), &cy, &den),
            Err(EpisodeError::MissingDenominator(1891))
        );
    }

    #[test]
    fn selection_policy() {
        let a = |id: &str, date: &str, text: &str| ArticleRecord {
            article_id: id.to_string(),
            source: crate::corpus::Source::Synthetic,
            publication_date: date.parse().unwrap(),
            newspaper_name: String::new(),
            state_raw: String::new(),
            city_raw: String::new(),
            text: text.to_string(),
            ocr_quality: None,
        };
        let arts = alloc::vec![a("x", "1893-01-03", "long text here"), a("y", "1893-01-01", "short"), a("z", "1893-01-02", "long text also")];
        let got = select_articles(&arts, 2, SelectionPolicy::LongestFirst);
        let ids: Vec<&str> = got.iter().map(|r| r.article_id.as_str()).collect();
        assert_eq!(ids, ["z", "x"]);
    }
}
