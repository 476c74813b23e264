//! Validation of model replies. Every stage output passes through here.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde_json::{Map, Value};

use super::{
    ArticleEvent, DiscardReason, EpisodeAnalysis, EpisodeInput, EventType, Extraction, LlmError, RejectedEvent,
    ResponseFlags, ScreenVerdict, TriState,
};
use crate::corpus::ArticleRecord;
use crate::dates::{DatePrecision, PartialDate};
use crate::episodes::EpisodeType;

/// Parses the first JSON object in `body`. Tolerates code fences and chatter
/// around the object, which models add despite instructions.
pub fn json_object(body: &str) -> Result<Map<String, Value>, LlmError> {
    let start = body.find('{').ok_or_else(|| LlmError::MalformedResponse(snippet(body)))?;
    let end = body.rfind('}').ok_or_else(|| LlmError::MalformedResponse(snippet(body)))?;
    if end < start {
        return Err(LlmError::MalformedResponse(snippet(body)));
    }
    match serde_json::from_str::<Value>(&body[start..=end]) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(LlmError::MalformedResponse(snippet(body))),
        Err(e) => Err(LlmError::MalformedResponse(format!("{e}: {}", snippet(body)))),
    }
}

fn snippet(body: &str) -> String {
    body.chars().take(120).collect()
}

fn str_field<'a>(m: &'a Map<String, Value>, field: &str) -> Result<Option<&'a str>, LlmError> {
    match m.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.as_str())),
        Some(_) => Err(LlmError::schema(field, "expected a string")),
    }
}

pub fn screen_verdict(body: &str) -> Result<ScreenVerdict, LlmError> {
    let m = json_object(body)?;
    let verdict = str_field(&m, "verdict")
        .map_err(|_| LlmError::MalformedResponse(snippet(body)))?
        .ok_or_else(|| LlmError::MalformedResponse(String::from("reply has no verdict")))?;
    match verdict.trim().to_ascii_lowercase().as_str() {
        "keep" => Ok(ScreenVerdict::Keep),
        "discard" => {
            let reason = str_field(&m, "reason").ok().flatten().unwrap_or("other");
            Ok(ScreenVerdict::Discard(DiscardReason::parse(&reason.trim().to_ascii_lowercase())))
        }
        other => Err(LlmError::MalformedResponse(format!("unknown verdict {other:?}"))),
    }
}

fn event_type(item: &Map<String, Value>) -> Result<EventType, LlmError> {
    let raw = str_field(item, "event_type")?.ok_or_else(|| LlmError::schema("event_type", "missing"))?;
    EventType::parse(raw.trim()).ok_or_else(|| LlmError::schema("event_type", &format!("unknown value {raw:?}")))
}

/// Event date and precision. A missing date falls back to `fallback` with
/// precision `inferred`.
fn event_date(item: &Map<String, Value>, fallback: &PartialDate) -> Result<(chrono::NaiveDate, DatePrecision), LlmError> {
    let stated = match str_field(item, "date_precision")? {
        None => None,
        Some(p) => Some(parse_precision(p)?),
    };
    match str_field(item, "event_date")? {
        None => Ok((fallback.date, DatePrecision::Inferred)),
        Some(s) if s.trim().is_empty() => Ok((fallback.date, DatePrecision::Inferred)),
        Some(s) => {
            let d: PartialDate = s.parse().map_err(|_| LlmError::schema("event_date", &format!("unparseable {s:?}")))?;
            let precision = match (stated, d.precision) {
                (Some(p), DatePrecision::Day) => p,
                (_, p) => p,
            };
            Ok((d.date, precision))
        }
    }
}

fn parse_precision(p: &str) -> Result<DatePrecision, LlmError> {
    match p.trim() {
        "day" => Ok(DatePrecision::Day),
        "month" => Ok(DatePrecision::Month),
        "year" => Ok(DatePrecision::Year),
        "inferred" => Ok(DatePrecision::Inferred),
        other => Err(LlmError::schema("date_precision", &format!("unknown value {other:?}"))),
    }
}

fn items<'a>(m: &'a Map<String, Value>, field: &str) -> Result<Vec<&'a Map<String, Value>>, LlmError> {
    let arr = match m.get(field) {
        Some(Value::Array(a)) => a,
        Some(Value::Null) | None => return Err(LlmError::schema(field, "missing")),
        Some(_) => return Err(LlmError::schema(field, "expected an array")),
    };
    arr.iter()
        .map(|v| v.as_object().ok_or_else(|| LlmError::schema(field, "expected an array of objects")))
        .collect()
}

pub fn article_events(body: &str, article: &ArticleRecord) -> Result<Extraction, LlmError> {
    let m = json_object(body)?;
    let mut out = Extraction::default();
    for (index, item) in items(&m, "events")?.into_iter().enumerate() {
        let event_type = event_type(item)?;
        let (event_date, date_precision) = event_date(item, &article.publication_date)?;
        let confidence = match item.get("confidence") {
            None | Some(Value::Null) => None,
            Some(v) => Some(v.as_f64().ok_or_else(|| LlmError::schema("confidence", "expected a number"))?),
        };
        let ev = ArticleEvent {
            article_id: article.article_id.clone(),
            bank_name_raw: str_field(item, "bank_name")?.unwrap_or("").trim().to_string(),
            state_raw: str_field(item, "state")?.unwrap_or("").trim().to_string(),
            city_raw: str_field(item, "city")?.unwrap_or("").trim().to_string(),
            event_type,
            event_date,
            date_precision,
            confidence,
        };
        match ev.check(article.publication_date.date) {
            Ok(()) => out.events.push(ev),
            Err(e) => out.rejected.push(RejectedEvent {
                article_id: article.article_id.clone(),
                index,
                reason: e.to_string(),
            }),
        }
    }
    Ok(out)
}

pub fn episode_analysis(body: &str, ep: &EpisodeInput<'_>) -> Result<EpisodeAnalysis, LlmError> {
    let m = json_object(body)?;
    let narrative = str_field(&m, "narrative")?.unwrap_or("").trim().to_string();
    let raw_type = str_field(&m, "episode_type")?.ok_or_else(|| LlmError::schema("episode_type", "missing"))?;
    let hint = EpisodeType::parse(raw_type.trim())
        .ok_or_else(|| LlmError::schema("episode_type", &format!("unknown value {raw_type:?}")))?;
    let mut events = Vec::new();
    for item in items(&m, "events")? {
        let aid = str_field(item, "article_id")?.ok_or_else(|| LlmError::schema("article_id", "missing"))?;
        let article = ep
            .articles
            .iter()
            .find(|a| a.article_id == aid)
            .ok_or_else(|| LlmError::schema("article_id", &format!("{aid:?} is not part of the episode")))?;
        let (event_date, date_precision) = event_date(item, &article.publication_date)?;
        let ev = ArticleEvent {
            article_id: article.article_id.clone(),
            bank_name_raw: ep.bank_name.to_string(),
            state_raw: article.state_raw.clone(),
            city_raw: article.city_raw.clone(),
            event_type: event_type(item)?,
            event_date,
            date_precision,
            confidence: None,
        };
        ev.check(article.publication_date.date)
            .map_err(|e| LlmError::schema("event_date", &e.to_string()))?;
        events.push(ev);
    }
    events.sort_by(|a, b| (a.event_date, a.event_type, &a.article_id).cmp(&(b.event_date, b.event_type, &b.article_id)));
    Ok(EpisodeAnalysis {
        episode_id: ep.episode_id.to_string(),
        bank_id: ep.bank_id.to_string(),
        episode_narrative: narrative,
        reclassified_events: events,
        episode_type_hint: hint,
        response_flags: ResponseFlags::default(),
        nonfundamental: TriState::Unclear,
        needs_review: false,
    })
}

/// All eight fields must be present and boolean.
pub fn response_flags(body: &str) -> Result<ResponseFlags, LlmError> {
    let m = json_object(body)?;
    let mut vals = [false; 8];
    for (slot, field) in vals.iter_mut().zip(ResponseFlags::FIELDS) {
        *slot = match m.get(field) {
            Some(Value::Bool(b)) => *b,
            Some(_) => return Err(LlmError::schema(field, "expected a boolean")),
            None => return Err(LlmError::schema(field, "missing")),
        };
    }
    Ok(ResponseFlags::from_array(vals))
}

pub fn nonfundamental(body: &str) -> Result<TriState, LlmError> {
    let m = json_object(body)?;
    let raw = str_field(&m, "nonfundamental")?.ok_or_else(|| LlmError::schema("nonfundamental", "missing"))?;
    TriState::parse(&raw.trim().to_ascii_lowercase())
        .ok_or_else(|| LlmError::schema("nonfundamental", &format!("unknown value {raw:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn object_is_found_inside_fences() {
        let m = json_object("```json\n{\"verdict\": \"keep\"}\n```").unwrap();
        assert_eq!(m["verdict"], "keep");
        assert!(matches!(json_object("no json here"), Err(LlmError::MalformedResponse(_))));
        assert!(matches!(json_object("[1, 2]"), Err(LlmError::MalformedResponse(_))));
    }

    #[test]
    fn verdicts() {
        assert_eq!(screen_verdict(r#"{"verdict":"keep"}"#).unwrap(), ScreenVerdict::Keep);
        assert_eq!(
            screen_verdict(r#"{"verdict":"discard","reason":"Foreign"}"#).unwrap(),
            ScreenVerdict::Discard(DiscardReason::Foreign)
        );
        assert!(matches!(screen_verdict(r#"{"verdict":"maybe"}"#), Err(LlmError::MalformedResponse(_))));
        assert!(matches!(screen_verdict(r#"{}"#), Err(LlmError::MalformedResponse(_))));
    }

    #[test]
    fn flags_require_all_fields() {
        let all_false = r#"{"accommodated_withdrawals":false,"interbank_borrowing":false,"public_signal":false,
            "equity_injection":false,"partial_suspension":false,"full_suspension":false,"examination":false,
            "clearinghouse_involved":false}"#;
        assert_eq!(response_flags(all_false).unwrap(), ResponseFlags::default());
        let err = response_flags(r#"{"accommodated_withdrawals":true}"#).unwrap_err();
        assert_eq!(err, LlmError::schema("interbank_borrowing", "missing"));
    }

    #[test]
    fn tri_state() {
        assert_eq!(nonfundamental(r#"{"nonfundamental":"yes","evidence":"x"}"#).unwrap(), TriState::Yes);
        assert!(nonfundamental(r#"{"nonfundamental":"perhaps"}"#).is_err());
    }
}
