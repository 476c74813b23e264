use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::dates::DatePrecision;
use crate::episodes::EpisodeType;

/// Kind of bank event asserted by one article.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    Run,
    Suspension,
    PartialSuspension,
    Failure,
    Reopening,
    Receivership,
    Other,
}

impl EventType {
    pub const ALL: [EventType; 7] = [
        EventType::Run,
        EventType::Suspension,
        EventType::PartialSuspension,
        EventType::Failure,
        EventType::Reopening,
        EventType::Receivership,
        EventType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventType::Run => "run",
            EventType::Suspension => "suspension",
            EventType::PartialSuspension => "partial_suspension",
            EventType::Failure => "failure",
            EventType::Reopening => "reopening",
            EventType::Receivership => "receivership",
            EventType::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|t| t.as_str() == s)
    }

    /// Receiverships are failures; partial suspensions are suspensions.
    pub fn is_failure(self) -> bool {
        matches!(self, EventType::Failure | EventType::Receivership)
    }

    pub fn is_suspension(self) -> bool {
        matches!(self, EventType::Suspension | EventType::PartialSuspension)
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Maximum number of days an event may postdate the article reporting it.
/// Covers notices like "will suspend on Monday".
pub const EVENT_DATE_SLACK_DAYS: i64 = 7;

/// One (bank, event type, date) assertion extracted from one article.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleEvent {
    pub article_id: String,
    pub bank_name_raw: String,
    #[serde(default)]
    pub state_raw: String,
    #[serde(default)]
    pub city_raw: String,
    pub event_type: EventType,
    pub event_date: NaiveDate,
    #[serde(default)]
    pub date_precision: DatePrecision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EventRejection {
    #[error("event dated {event} is more than {EVENT_DATE_SLACK_DAYS} days after publication {published}")]
    AfterPublication { event: NaiveDate, published: NaiveDate },
    #[error("empty bank name")]
    EmptyBankName,
    #[error("confidence outside [0, 1]")]
    BadConfidence,
}

impl ArticleEvent {
    /// Checks the type invariants against the publication date of the source article.
    pub fn check(&self, published: NaiveDate) -> Result<(), EventRejection> {
        if self.bank_name_raw.trim().is_empty() {
            return Err(EventRejection::EmptyBankName);
        }
        if let Some(c) = self.confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(EventRejection::BadConfidence);
            }
        }
        if self.event_date > published + Duration::days(EVENT_DATE_SLACK_DAYS) {
            return Err(EventRejection::AfterPublication { event: self.event_date, published });
        }
        Ok(())
    }
}

/// Bank responses to a run. Independent booleans; several can hold at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ResponseFlags {
    #[serde(default)]
    pub accommodated_withdrawals: bool,
    #[serde(default)]
    pub interbank_borrowing: bool,
    #[serde(default)]
    pub public_signal: bool,
    #[serde(default)]
    pub equity_injection: bool,
    #[serde(default)]
    pub partial_suspension: bool,
    #[serde(default)]
    pub full_suspension: bool,
    #[serde(default)]
    pub examination: bool,
    #[serde(default)]
    pub clearinghouse_involved: bool,
}

impl ResponseFlags {
    pub const FIELDS: [&'static str; 8] = [
        "accommodated_withdrawals",
        "interbank_borrowing",
        "public_signal",
        "equity_injection",
        "partial_suspension",
        "full_suspension",
        "examination",
        "clearinghouse_involved",
    ];

    pub fn as_array(&self) -> [bool; 8] {
        [
            self.accommodated_withdrawals,
            self.interbank_borrowing,
            self.public_signal,
            self.equity_injection,
            self.partial_suspension,
            self.full_suspension,
            self.examination,
            self.clearinghouse_involved,
        ]
    }

    pub fn from_array(a: [bool; 8]) -> Self {
        Self {
            accommodated_withdrawals: a[0],
            interbank_borrowing: a[1],
            public_signal: a[2],
            equity_injection: a[3],
            partial_suspension: a[4],
            full_suspension: a[5],
            examination: a[6],
            clearinghouse_involved: a[7],
        }
    }

    pub fn any(&self) -> bool {
        self.as_array().iter().any(|&b| b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriState {
    Yes,
    No,
    #[default]
    Unclear,
}

impl TriState {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "yes" => Some(TriState::Yes),
            "no" => Some(TriState::No),
            "unclear" => Some(TriState::Unclear),
            _ => None,
        }
    }
}

/// Why the quick screen threw an article away.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    Foreign,
    Hypothetical,
    Fiction,
    Tangential,
    Unrelated,
    Other(String),
}

impl DiscardReason {
    pub fn parse(s: &str) -> Self {
        match s {
            "foreign" => DiscardReason::Foreign,
            "hypothetical" => DiscardReason::Hypothetical,
            "fiction" | "fictional" => DiscardReason::Fiction,
            "tangential" => DiscardReason::Tangential,
            "unrelated" => DiscardReason::Unrelated,
            other => DiscardReason::Other(String::from(other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict", content = "reason")]
pub enum ScreenVerdict {
    Keep,
    Discard(DiscardReason),
}

/// Joint reading of every article in one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeAnalysis {
    pub episode_id: String,
    /// Every reclassified event belongs to this bank.
    pub bank_id: String,
    pub episode_narrative: String,
    pub reclassified_events: Vec<ArticleEvent>,
    pub episode_type_hint: EpisodeType,
    #[serde(default)]
    pub response_flags: ResponseFlags,
    #[serde(default)]
    pub nonfundamental: TriState,
    #[serde(default)]
    pub needs_review: bool,
}
