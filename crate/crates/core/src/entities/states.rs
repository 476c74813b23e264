use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::EntityError;

/// (FIPS code, postal code, name)
pub const STATES: [(u8, &str, &str); 52] = [
    (1, "AL", "Alabama"),
    (2, "AK", "Alaska"),
    (4, "AZ", "Arizona"),
    (5, "AR", "Arkansas"),
    (6, "CA", "California"),
    (8, "CO", "Colorado"),
    (9, "CT", "Connecticut"),
    (10, "DE", "Delaware"),
    (11, "DC", "District of Columbia"),
    (12, "FL", "Florida"),
    (13, "GA", "Georgia"),
    (15, "HI", "Hawaii"),
    (16, "ID", "Idaho"),
    (17, "IL", "Illinois"),
    (18, "IN", "Indiana"),
    (19, "IA", "Iowa"),
    (20, "KS", "Kansas"),
    (21, "KY", "Kentucky"),
    (22, "LA", "Louisiana"),
    (23, "ME", "Maine"),
    (24, "MD", "Maryland"),
    (25, "MA", "Massachusetts"),
    (26, "MI", "Michigan"),
    (27, "MN", "Minnesota"),
    (28, "MS", "Mississippi"),
    (29, "MO", "Missouri"),
    (30, "MT", "Montana"),
    (31, "NE", "Nebraska"),
    (32, "NV", "Nevada"),
    (33, "NH", "New Hampshire"),
    (34, "NJ", "New Jersey"),
    (35, "NM", "New Mexico"),
    (36, "NY", "New York"),
    (37, "NC", "North Carolina"),
    (38, "ND", "North Dakota"),
    (39, "OH", "Ohio"),
    (40, "OK", "Oklahoma"),
    (41, "OR", "Oregon"),
    (42, "PA", "Pennsylvania"),
    (44, "RI", "Rhode Island"),
    (45, "SC", "South Carolina"),
    (46, "SD", "South Dakota"),
    (47, "TN", "Tennessee"),
    (48, "TX", "Texas"),
    (49, "UT", "Utah"),
    (50, "VT", "Vermont"),
    (51, "VA", "Virginia"),
    (53, "WA", "Washington"),
    (54, "WV", "West Virginia"),
    (55, "WI", "Wisconsin"),
    (56, "WY", "Wyoming"),
    (72, "PR", "Puerto Rico"),
];

/// Period abbreviations and historical names, keyed by letters only.
const ALIASES: [(&str, &[u8]); 62] = [
    ("ala", &[1]),
    ("alaskaterritory", &[2]),
    ("ariz", &[4]),
    ("ark", &[5]),
    ("cal", &[6]),
    ("calif", &[6]),
    ("colo", &[8]),
    ("conn", &[9]),
    ("del", &[10]),
    ("washingtondc", &[11]),
    ("fla", &[12]),
    ("hawaiianislands", &[15]),
    ("ida", &[16]),
    ("ill", &[17]),
    ("ind", &[18]),
    ("kan", &[20]),
    ("kans", &[20]),
    ("mass", &[25]),
    ("mich", &[26]),
    ("minn", &[27]),
    ("miss", &[28]),
    ("mont", &[30]),
    ("neb", &[31]),
    ("nebr", &[31]),
    ("nev", &[32]),
    ("nmex", &[35]),
    ("okla", &[40]),
    ("indian", &[40]),
    ("ore", &[41]),
    ("oreg", &[41]),
    ("penn", &[42]),
    ("penna", &[42]),
    ("tenn", &[47]),
    ("tex", &[48]),
    ("wash", &[53]),
    ("wva", &[54]),
    ("wis", &[55]),
    ("wisc", &[55]),
    ("wyo", &[56]),
    ("portorico", &[72]),
    ("dakota", &[38, 46]),
    ("dak", &[38, 46]),
    ("ndak", &[38]),
    ("sdak", &[46]),
    ("va", &[51]),
    ("ga", &[13]),
    ("ky", &[21]),
    ("la", &[22]),
    ("me", &[23]),
    ("md", &[24]),
    ("mo", &[29]),
    ("nh", &[33]),
    ("nj", &[34]),
    ("ny", &[36]),
    ("nc", &[37]),
    ("sc", &[45]),
    ("pa", &[42]),
    ("ri", &[44]),
    ("vt", &[50]),
    ("ia", &[19]),
    ("dc", &[11]),
    ("ut", &[49]),
];

/// One state, or several when a historical name maps to more than one
/// successor state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateMatch {
    pub candidates: Vec<u8>,
}

impl StateMatch {
    pub fn unique(&self) -> Option<u8> {
        match self.candidates.as_slice() {
            [one] => Some(*one),
            _ => None,
        }
    }
}

fn letters(s: &str) -> String {
    s.chars().filter(|c| c.is_alphabetic()).flat_map(char::to_lowercase).collect()
}

fn strip_territory(key: &str) -> &str {
    let key = key.strip_prefix("territoryof").unwrap_or(key);
    for suffix in ["territory", "terr", "ter"] {
        if let Some(k) = key.strip_suffix(suffix) {
            if !k.is_empty() {
                return k;
            }
        }
    }
    key
}

fn lookup(key: &str) -> Option<Vec<u8>> {
    if let Some(&(f, _, _)) = STATES.iter().find(|(_, code, name)| letters(name) == key || code.to_ascii_lowercase() == key) {
        return Some(alloc::vec![f]);
    }
    ALIASES.iter().find(|(k, _)| *k == key).map(|(_, v)| v.to_vec())
}

/// Maps a raw state or territory name to FIPS code(s). Territories resolve
/// to their successor states.
pub fn normalize_state(raw: &str) -> Result<StateMatch, EntityError> {
    let key = letters(raw);
    if key.is_empty() {
        return Err(EntityError::UnknownState(String::from(raw)));
    }
    lookup(&key)
        .or_else(|| lookup(strip_territory(&key)))
        .map(|candidates| StateMatch { candidates })
        .ok_or_else(|| EntityError::UnknownState(String::from(raw)))
}

pub fn state_name(fips: u8) -> Option<&'static str> {
    STATES.iter().find(|s| s.0 == fips).map(|s| s.2)
}

pub fn state_code(fips: u8) -> Option<&'static str> {
    STATES.iter().find(|s| s.0 == fips).map(|s| s.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(raw: &str) -> Option<u8> {
        normalize_state(raw).ok().and_then(|m| m.unique())
    }

    #[test]
    fn territories_and_case() {
        assert_eq!(one("Colorado Territory"), Some(8));
        assert_eq!(one("colorado"), Some(8));
        assert_eq!(normalize_state("Dakota Territory").unwrap().candidates, [38, 46]);
        assert_eq!(one("Indian Territory"), Some(40));
        assert_eq!(one("Territory of New Mexico"), Some(35));
        assert_eq!(one("Porto Rico"), Some(72));
    }

    #[test]
    fn abbreviations() {
        assert_eq!(one("N.Y."), Some(36));
        assert_eq!(one("Penna."), Some(42));
        assert_eq!(one("W. Va."), Some(54));
        assert_eq!(one("PA"), Some(42));
        assert!(normalize_state("Atlantis").is_err());
        assert!(normalize_state("").is_err());
    }

    #[test]
    fn every_name_and_code_resolves() {
        for (f, code, name) in STATES {
            assert_eq!(one(name), Some(f), "{name}");
            assert_eq!(one(code), Some(f), "{code}");
        }
    }
}
