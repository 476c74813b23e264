//! Loaders for the reference tables: registry, gazetteer, crosswalks,
//! receiverships, call reports and covariates. CSV or JSONL by extension.

use std::collections::BTreeMap;
use std::path::Path;

use bankrun_core::entities::{
    default_city_crosswalk, BankRecord, BankRegistry, CityCrosswalk, Gazetteer, GazetteerEntry, GazetteerReport, ManualMatch,
    NameCrosswalk,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_table, Format};

/// Gazetteer line in CSV form: list fields are `;`-separated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GazetteerCsvRow {
    pub state_fips: u8,
    pub canonical_city: String,
    #[serde(default)]
    pub alt_spellings: String,
    #[serde(default)]
    pub sources: String,
}

fn split_list(s: &str) -> Vec<String> {
    s.split(';').map(str::trim).filter(|x| !x.is_empty()).map(String::from).collect()
}

impl From<GazetteerCsvRow> for GazetteerEntry {
    fn from(r: GazetteerCsvRow) -> Self {
        GazetteerEntry {
            state_fips: r.state_fips,
            canonical_city: r.canonical_city,
            alt_spellings: split_list(&r.alt_spellings),
            sources: split_list(&r.sources),
        }
    }
}

impl From<&GazetteerEntry> for GazetteerCsvRow {
    fn from(e: &GazetteerEntry) -> Self {
        GazetteerCsvRow {
            state_fips: e.state_fips,
            canonical_city: e.canonical_city.clone(),
            alt_spellings: e.alt_spellings.join(";"),
            sources: e.sources.join(";"),
        }
    }
}

pub fn load_gazetteer_entries(path: &Path) -> Result<Vec<GazetteerEntry>> {
    match Format::from_path(path) {
        Format::Csv => Ok(read_table::<GazetteerCsvRow>(path)?.into_iter().map(Into::into).collect()),
        Format::Jsonl => read_table(path),
    }
}

/// Builds the gazetteer. The built-in city crosswalk is always applied;
/// a crosswalk file adds to it.
pub fn load_gazetteer(path: &Path, crosswalk: Option<&Path>) -> Result<(Gazetteer, GazetteerReport)> {
    let entries = load_gazetteer_entries(path)?;
    let mut cw = default_city_crosswalk();
    if let Some(p) = crosswalk {
        cw.extend(read_table::<CityCrosswalk>(p)?);
    }
    Ok(Gazetteer::build(entries, &cw))
}

pub fn load_registry(path: &Path, crosswalk: Option<&Path>, manual: Option<&Path>) -> Result<BankRegistry> {
    let banks: Vec<BankRecord> = read_table(path)?;
    let cw: Vec<NameCrosswalk> = match crosswalk {
        Some(p) => read_table(p)?,
        None => Vec::new(),
    };
    let mm: Vec<ManualMatch> = match manual {
        Some(p) => read_table(p)?,
        None => Vec::new(),
    };
    BankRegistry::new(banks, cw, mm).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BankCount {
    pub year: i32,
    pub banks: u64,
}

/// Number of banks per year, the denominator of run and failure rates.
pub fn load_bank_counts(path: &Path) -> Result<BTreeMap<i32, u64>> {
    let rows: Vec<BankCount> = read_table(path)?;
    let mut out = BTreeMap::new();
    for r in rows {
        if out.insert(r.year, r.banks).is_some() {
            return Err(Error::Data(format!("{}: year {} listed twice", path.display(), r.year)));
        }
    }
    Ok(out)
}

pub fn load_optional<T: serde::de::DeserializeOwned>(path: Option<&Path>) -> Result<Vec<T>> {
    match path {
        Some(p) => read_table(p),
        None => Ok(Vec::new()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gazetteer_csv_lists() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csv");
        std::fs::write(&p, "state_fips,canonical_city,alt_spellings,sources\n36,New York,New-York; NYC,census\n17,Chicago,,\n").unwrap();
        let e = load_gazetteer_entries(&p).unwrap();
        assert_eq!(e[0].alt_spellings, ["New-York", "NYC"]);
        assert!(e[1].alt_spellings.is_empty());
        let (g, _) = load_gazetteer(&p, None).unwrap();
        assert_eq!(g.normalize_city(36, "new york").unwrap(), "New York");
    }

    #[test]
    fn registry_with_optional_columns() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        std::fs::write(
            &p,
            "bank_id,canonical_name,state_fips,canonical_city,charter_type,active_from,active_to\n\
             b1,First National Bank,36,New York,national,,\n\
             b2,Union Trust Company,36,New York,trust,1880-01-01,1920-12-31\n",
        )
        .unwrap();
        let r = load_registry(&p, None, None).unwrap();
        assert_eq!(r.len(), 2);
        assert!(r.get("b2").unwrap().active_to.is_some());
    }

    #[test]
    fn repeated_count_year_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        std::fs::write(&p, "year,banks\n1900,10\n1900,11\n").unwrap();
        assert!(matches!(load_bank_counts(&p), Err(Error::Data(_))));
    }
}
