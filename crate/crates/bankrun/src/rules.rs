//! Keyword rules as editable data. TOML or JSON, by extension.

use std::path::Path;

use bankrun_core::textfilter::{CompiledRules, RuleSet};

use crate::error::{Error, Result};

/// The default rules in file form, as shipped.
pub const SHIPPED_RULES: &str = include_str!("../assets/rules.toml");

pub fn parse_rules(text: &str, json: bool) -> Result<RuleSet> {
    let set: RuleSet = if json {
        serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(format!("rules: {e}")))?
    } else {
        toml::from_str(text).map_err(|e| Error::ConfigInvalid(format!("rules: {e}")))?
    };
    CompiledRules::new(&set).map_err(|e| Error::ConfigInvalid(format!("rules: {e}")))?;
    Ok(set)
}

pub fn load_rules(path: Option<&Path>) -> Result<RuleSet> {
    match path {
        None => Ok(RuleSet::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => Error::ConfigInvalid(format!("rules file {} not found", p.display())),
                _ => Error::io(p, e),
            })?;
            parse_rules(&text, p.extension().is_some_and(|e| e == "json"))
        }
    }
}

pub fn rules_to_toml(set: &RuleSet) -> String {
    toml::to_string(set).expect("rule sets serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_file_is_the_default() {
        assert_eq!(parse_rules(SHIPPED_RULES, false).unwrap(), RuleSet::default());
    }

    #[test]
    fn broken_rules_are_config_errors() {
        assert!(matches!(parse_rules("cleaner = 3", false), Err(Error::ConfigInvalid(_))));
        let mut set = RuleSet::default();
        set.rules[0].groups[0].terms.push(String::new());
        let text = serde_json::to_string(&set).unwrap();
        assert!(matches!(parse_rules(&text, true), Err(Error::ConfigInvalid(_))));
    }
}
