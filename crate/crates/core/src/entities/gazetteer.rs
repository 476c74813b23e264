use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::distance::damerau_levenshtein;
use super::EntityError;

/// Names longer than this are treated as data-entry debris and dropped.
pub const MAX_CITY_NAME_CHARS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GazetteerEntry {
    pub state_fips: u8,
    pub canonical_city: String,
    #[serde(default)]
    pub alt_spellings: Vec<String>,
    #[serde(default)]
    pub sources: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CityCrosswalk {
    pub state_fips: u8,
    pub raw_city: String,
    pub canonical_city: String,
}

/// What was dropped or merged while building a gazetteer.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GazetteerReport {
    pub dropped_too_long: Vec<String>,
    /// Entries whose normalized name repeated an earlier one in the same
    /// state; their spellings were merged into the first.
    pub merged_duplicates: Vec<String>,
    /// Crosswalk rows whose target is not in the gazetteer.
    pub dangling_crosswalk: Vec<String>,
}

/// Case-folded, punctuation-light key used for every city comparison.
pub fn city_key(raw: &str) -> String {
    let mut s = String::with_capacity(raw.len());
    for c in raw.chars() {
        match c {
            '.' | '\'' | ',' => {}
            '-' => s.push(' '),
            c => s.extend(c.to_lowercase()),
        }
    }
    let words: Vec<&str> = s.split_whitespace().collect();
    let mut out = words.join(" ");
    out = replace_word(&out, "centre", "center");
    out.replace("borough", "boro")
}

fn replace_word(s: &str, from: &str, to: &str) -> String {
    s.split(' ').map(|w| if w == from { to } else { w }).collect::<Vec<_>>().join(" ")
}

/// Canonical city names per state, with alternate spellings and a crosswalk
/// for renamed or absorbed places. Immutable once built.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Gazetteer {
    entries: Vec<GazetteerEntry>,
    /// (state, key) -> index into entries
    index: BTreeMap<(u8, String), usize>,
    crosswalk: BTreeMap<(u8, String), usize>,
}

/// Crosswalk rows that ship with the tool.
pub fn default_city_crosswalk() -> Vec<CityCrosswalk> {
    alloc::vec![
        CityCrosswalk { state_fips: 33, raw_city: "Wolfboro".into(), canonical_city: "Wolfeboro".into() },
        CityCrosswalk { state_fips: 17, raw_city: "Morton Park".into(), canonical_city: "Chicago".into() },
        CityCrosswalk { state_fips: 42, raw_city: "Allegheny City".into(), canonical_city: "Allegheny".into() },
    ]
}

impl Gazetteer {
    pub fn build(entries: Vec<GazetteerEntry>, crosswalk: &[CityCrosswalk]) -> (Self, GazetteerReport) {
        let mut report = GazetteerReport::default();
        let mut g = Gazetteer::default();
        for mut e in entries {
            e.canonical_city = e.canonical_city.split_whitespace().collect::<Vec<_>>().join(" ");
            if e.canonical_city.chars().count() > MAX_CITY_NAME_CHARS || e.canonical_city.is_empty() {
                report.dropped_too_long.push(e.canonical_city);
                continue;
            }
            e.alt_spellings.retain(|a| a.chars().count() <= MAX_CITY_NAME_CHARS && !a.trim().is_empty());
            let key = (e.state_fips, city_key(&e.canonical_city));
            if let Some(&i) = g.index.get(&key) {
                report.merged_duplicates.push(e.canonical_city.clone());
                let first = &mut g.entries[i];
                for a in e.alt_spellings {
                    if !first.alt_spellings.contains(&a) {
                        first.alt_spellings.push(a);
                    }
                }
                for s in e.sources {
                    if !first.sources.contains(&s) {
                        first.sources.push(s);
                    }
                }
                continue;
            }
            g.index.insert(key, g.entries.len());
            g.entries.push(e);
        }
        for i in 0..g.entries.len() {
            let fips = g.entries[i].state_fips;
            let alts: Vec<String> = g.entries[i].alt_spellings.clone();
            for a in alts {
                g.index.entry((fips, city_key(&a))).or_insert(i);
            }
        }
        for c in crosswalk {
            match g.index.get(&(c.state_fips, city_key(&c.canonical_city))) {
                Some(&i) => {
                    g.crosswalk.insert((c.state_fips, city_key(&c.raw_city)), i);
                }
                None => report.dangling_crosswalk.push(c.raw_city.clone()),
            }
        }
        (g, report)
    }

    pub fn entries(&self) -> &[GazetteerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Spelling standardization, then exact lookup, then the crosswalk.
    pub fn normalize_city(&self, state_fips: u8, raw_city: &str) -> Result<String, EntityError> {
        let key = city_key(raw_city);
        if let Some(&i) = self.index.get(&(state_fips, key.clone())) {
            return Ok(self.entries[i].canonical_city.clone());
        }
        if let Some(&i) = self.crosswalk.get(&(state_fips, key.clone())) {
            return Ok(self.entries[i].canonical_city.clone());
        }
        Err(EntityError::UnknownCity { raw: raw_city.to_string(), suggestions: self.suggest(state_fips, &key, 3) })
    }

    /// Whether `raw_city` reaches `canonical` only through the crosswalk.
    pub fn is_crosswalk_alias(&self, state_fips: u8, raw_city: &str, canonical: &str) -> bool {
        self.crosswalk
            .get(&(state_fips, city_key(raw_city)))
            .is_some_and(|&i| city_key(&self.entries[i].canonical_city) == city_key(canonical))
    }

    fn suggest(&self, state_fips: u8, key: &str, k: usize) -> Vec<String> {
        let mut scored: Vec<(usize, &str)> = self
            .entries
            .iter()
            .filter(|e| e.state_fips == state_fips)
            .map(|e| (damerau_levenshtein(key, &city_key(&e.canonical_city)), e.canonical_city.as_str()))
            .collect();
        scored.sort();
        let mut seen = BTreeSet::new();
        scored
            .into_iter()
            .filter(|(_, n)| seen.insert(*n))
            .take(k)
            .map(|(_, n)| n.to_string())
            .collect()
    }

    /// Tries each candidate state and keeps the one in which the city is known.
    pub fn disambiguate_state(&self, candidates: &[u8], raw_city: &str) -> Option<(u8, String)> {
        let hits: Vec<(u8, String)> =
            candidates.iter().filter_map(|&f| self.normalize_city(f, raw_city).ok().map(|c| (f, c))).collect();
        match hits.as_slice() {
            [one] => Some(one.clone()),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g() -> Gazetteer {
        let e = |f: u8, c: &str| GazetteerEntry { state_fips: f, canonical_city: c.into(), alt_spellings: Vec::new(), sources: Vec::new() };
        let mut long = String::new();
        for _ in 0..70 {
            long.push('x');
        }
        let (g, report) = Gazetteer::build(
            alloc::vec![e(33, "Wolfeboro"), e(17, "Chicago"), e(36, "New York"), e(42, "State College"), e(36, &long), e(42, "Centre Hall")],
            &default_city_crosswalk(),
        );
        assert_eq!(report.dropped_too_long.len(), 1);
        assert_eq!(report.dangling_crosswalk, ["Allegheny City"]);
        g
    }

    #[test]
    fn reference_cases() {
        let g = g();
        assert_eq!(g.normalize_city(33, "Wolfboro").unwrap(), "Wolfeboro");
        assert_eq!(g.normalize_city(17, "Morton Park").unwrap(), "Chicago");
        assert_eq!(g.normalize_city(36, "NEW  YORK").unwrap(), "New York");
        assert_eq!(g.normalize_city(42, "Center Hall").unwrap(), "Centre Hall");
        assert_eq!(g.normalize_city(33, "Wolfeborough").unwrap(), "Wolfeboro");
    }

    #[test]
    fn unknown_city_suggests() {
        match g().normalize_city(36, "New Yrok") {
            Err(EntityError::UnknownCity { suggestions, .. }) => assert_eq!(suggestions[0], "New York"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn idempotent_on_outputs() {
        let g = g();
        for (f, raw) in [(33, "Wolfboro"), (17, "Morton Park"), (36, "new york")] {
            let once = g.normalize_city(f, raw).unwrap();
            assert_eq!(g.normalize_city(f, &once).unwrap(), once);
        }
    }
}
