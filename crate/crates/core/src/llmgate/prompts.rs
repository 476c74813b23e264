use alloc::string::String;

use crate::digest::sha256_fields;

/// Prompt templates, one per stage. Slots are written `{{name}}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    pub quick: String,
    pub events: String,
    pub episode: String,
    pub responses: String,
    pub nonfundamental: String,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self {
            quick: String::from(include_str!("../../prompts/quick.txt")),
            events: String::from(include_str!("../../prompts/events.txt")),
            episode: String::from(include_str!("../../prompts/episode.txt")),
            responses: String::from(include_str!("../../prompts/responses.txt")),
            nonfundamental: String::from(include_str!("../../prompts/nonfundamental.txt")),
        }
    }
}

impl PromptSet {
    pub const FILES: [&'static str; 5] =
        ["quick.txt", "events.txt", "episode.txt", "responses.txt", "nonfundamental.txt"];

    /// Digest over all templates, recorded in provenance.
    pub fn digest(&self) -> String {
        sha256_fields(&[&self.quick, &self.events, &self.episode, &self.responses, &self.nonfundamental])
    }

    pub fn get_mut(&mut self, file: &str) -> Option<&mut String> {
        match file {
            "quick.txt" => Some(&mut self.quick),
            "events.txt" => Some(&mut self.events),
            "episode.txt" => Some(&mut self.episode),
            "responses.txt" => Some(&mut self.responses),
            "nonfundamental.txt" => Some(&mut self.nonfundamental),
            _ => None,
        }
    }
}

/// Fills `{{slot}}` placeholders in one pass. Unknown slots are left as
/// written; substituted values are never rescanned.
pub fn render(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        match after.find("}}") {
            Some(close) => {
                let name = after[..close].trim();
                match slots.iter().find(|(k, _)| *k == name) {
                    Some((_, v)) => out.push_str(v),
                    None => out.push_str(&rest[open..open + 2 + close + 2]),
                }
                rest = &after[close + 2..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_fills_known_slots_once() {
        let t = "a {{x}} b {{ y }} c {{z}}";
        assert_eq!(render(t, &[("x", "{{y}}"), ("y", "2")]), "a {{y}} b 2 c {{z}}");
        assert_eq!(render("no slots", &[]), "no slots");
        assert_eq!(render("open {{ end", &[]), "open {{ end");
    }

    #[test]
    fn default_templates_have_text_slots() {
        let p = PromptSet::default();
        assert!(p.quick.contains("{{article_text}}"));
        assert!(p.events.contains("{{article_text}}"));
        assert!(p.episode.contains("{{articles}}"));
        assert!(p.responses.contains("{{articles}}"));
        assert!(p.nonfundamental.contains("{{articles}}"));
    }
}
