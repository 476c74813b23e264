//! Calendar dates with an explicit precision marker.
//!
//! Old newspapers frequently give only a month ("June, 1893") or a year. Such
//! dates are stored with their precision and a stand-in day so that gap
//! arithmetic stays defined: the 15th for month precision, July 1st for year
//! precision.

use alloc::format;
use alloc::string::String;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DatePrecision {
    #[default]
    Day,
    Month,
    Year,
    /// Not stated in the source; taken from context (usually the article date).
    Inferred,
}

/// Day used in place of a missing day of month.
pub const MID_MONTH_DAY: u32 = 15;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unparseable date {0:?}")]
pub struct DateParseError(pub String);

/// A date plus how much of it the source actually stated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PartialDate {
    pub date: NaiveDate,
    pub precision: DatePrecision,
}

impl PartialDate {
    pub fn day(date: NaiveDate) -> Self {
        Self { date, precision: DatePrecision::Day }
    }

    pub fn ymd(y: i32, m: u32, d: u32) -> Option<Self> {
        NaiveDate::from_ymd_opt(y, m, d).map(Self::day)
    }

    pub fn year(&self) -> i32 {
        self.date.year()
    }
}

impl PartialOrd for PartialDate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PartialDate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.date.cmp(&other.date).then(self.precision.cmp(&other.precision))
    }
}

impl FromStr for PartialDate {
    type Err = DateParseError;

    /// Accepts `YYYY-MM-DD`, `YYYY-MM` and `YYYY`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let err = || DateParseError(String::from(s));
        let parts: alloc::vec::Vec<&str> = t.split('-').collect();
        let num = |p: &str| -> Result<u32, DateParseError> {
            if p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit()) {
                return Err(err());
            }
            p.parse::<u32>().map_err(|_| err())
        };
        match parts.as_slice() {
            [y, m, d] if y.len() == 4 => {
                let date = NaiveDate::from_ymd_opt(num(y)? as i32, num(m)?, num(d)?).ok_or_else(err)?;
                Ok(Self { date, precision: DatePrecision::Day })
            }
            [y, m] if y.len() == 4 => {
                let date = NaiveDate::from_ymd_opt(num(y)? as i32, num(m)?, MID_MONTH_DAY).ok_or_else(err)?;
                Ok(Self { date, precision: DatePrecision::Month })
            }
            [y] if y.len() == 4 => {
                let date = NaiveDate::from_ymd_opt(num(y)? as i32, 7, 1).ok_or_else(err)?;
                Ok(Self { date, precision: DatePrecision::Year })
            }
            _ => Err(err()),
        }
    }
}

impl fmt::Display for PartialDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.precision {
            DatePrecision::Day | DatePrecision::Inferred => write!(f, "{}", self.date.format("%Y-%m-%d")),
            DatePrecision::Month => write!(f, "{}", self.date.format("%Y-%m")),
            DatePrecision::Year => write!(f, "{}", self.date.year()),
        }
    }
}

impl Serialize for PartialDate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{self}"))
    }
}

impl<'de> Deserialize<'de> for PartialDate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Signed number of days from `a` to `b`.
pub fn days_between(a: NaiveDate, b: NaiveDate) -> i64 {
    (b - a).num_days()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_partial_forms() {
        let d: PartialDate = "1893-06".parse().unwrap();
        assert_eq!(d.precision, DatePrecision::Month);
        assert_eq!(d.date, NaiveDate::from_ymd_opt(1893, 6, 15).unwrap());
        assert_eq!(format!("{d}"), "1893-06");

        let y: PartialDate = "1907".parse().unwrap();
        assert_eq!(y.precision, DatePrecision::Year);
        assert_eq!(format!("{y}"), "1907");

        assert!("1893-13-01".parse::<PartialDate>().is_err());
        assert!("93-06-01".parse::<PartialDate>().is_err());
        assert!("".parse::<PartialDate>().is_err());
    }

    #[test]
    fn ordering_is_by_date_first() {
        let a: PartialDate = "1893-06-01".parse().unwrap();
        let b: PartialDate = "1893-06".parse().unwrap();
        assert!(a < b);
    }
}
