//! Keyword screen for articles that may describe bank distress.
//!
//! Text is first case-folded and stripped of known unrelated usages ("river
//! bank", "bank notes", people named Banks). Rules then test for the
//! co-occurrence of term groups. Terms match whole tokens, where a token is a
//! maximal run of alphanumeric characters, so "runner" never matches "run".
//! A term is a single word, a `prefix*`, or a space-separated sequence of
//! those that must appear on consecutive tokens.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::ArticleRecord;
use crate::digest::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleId {
    BankRun,
    BankSuspension,
    BankReceivership,
    BankPanic,
    LargeWithdrawals,
    DistressPhrase,
    SuspensionRuleNotice,
}

impl RuleId {
    pub const ALL: [RuleId; 7] = [
        RuleId::BankRun,
        RuleId::BankSuspension,
        RuleId::BankReceivership,
        RuleId::BankPanic,
        RuleId::LargeWithdrawals,
        RuleId::DistressPhrase,
        RuleId::SuspensionRuleNotice,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::BankRun => "bank_run",
            RuleId::BankSuspension => "bank_suspension",
            RuleId::BankReceivership => "bank_receivership",
            RuleId::BankPanic => "bank_panic",
            RuleId::LargeWithdrawals => "large_withdrawals",
            RuleId::DistressPhrase => "distress_phrase",
            RuleId::SuspensionRuleNotice => "suspension_rule_notice",
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Alternatives, any one of which satisfies the group. `extra` holds terms
/// that are ours rather than part of the reference keyword table; they match
/// the same way but are kept apart so reports can tell them apart.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TermGroup {
    pub terms: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra: Vec<String>,
}

impl TermGroup {
    fn of(terms: &[&str]) -> Self {
        Self { terms: terms.iter().map(|s| s.to_string()).collect(), extra: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionRule {
    pub id: RuleId,
    /// Every group must match somewhere in the article.
    pub groups: Vec<TermGroup>,
    /// Collocations whose tokens never count as term matches.
    #[serde(default)]
    pub exclude: Vec<String>,
    /// When set, every group must match within this many tokens of an
    /// occurrence of the first group. Unset means the whole article.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default)]
    pub notes: String,
}

/// Phrases deleted before matching, in three lists for bookkeeping only.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Cleaner {
    #[serde(default)]
    pub geographic: Vec<String>,
    #[serde(default)]
    pub proper_names: Vec<String>,
    #[serde(default)]
    pub financial: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    pub cleaner: Cleaner,
    pub rules: Vec<DetectionRule>,
}

const ANCHOR: [&str; 6] = ["bank", "banks", "banking", "trust co", "trust company", "trust companies"];

/// The four distress phrases quoted in the reference keyword table.
pub const CANONICAL_DISTRESS_PHRASES: [&str; 4] =
    ["heavy run", "financial stringency", "temporary embarrassment", "heavy withdrawals"];

/// Our completion of the distress-phrase list to seventeen entries.
pub const EXTRA_DISTRESS_PHRASES: [&str; 13] = [
    "closed its doors",
    "closed doors",
    "depositors crowded",
    "depositors clamoring",
    "panicky depositors",
    "uneasy depositors",
    "nervous depositors",
    "frightened depositors",
    "excited depositors",
    "crowd of depositors",
    "money stringency",
    "embarrassed bank",
    "went to the wall",
];

impl Default for RuleSet {
    fn default() -> Self {
        let owned = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let anchor = TermGroup::of(&ANCHOR);
        let rules = vec![
            DetectionRule {
                id: RuleId::BankRun,
                groups: vec![anchor.clone(), TermGroup::of(&["run", "runs"])],
                exclude: owned(&[
                    "trains are running",
                    "trains run",
                    "home run",
                    "run for office",
                    "in the long run",
                    "run over",
                ]),
                window: None,
                notes: String::from("bank + run"),
            },
            DetectionRule {
                id: RuleId::BankSuspension,
                groups: vec![anchor.clone(), TermGroup::of(&["suspen*"])],
                exclude: owned(&[
                    "suspension of production",
                    "rules were suspended",
                    "rules suspended",
                    "suspend the rules",
                    "suspension bridge",
                    "suspended sentence",
                ]),
                window: None,
                notes: String::from("bank + suspen*"),
            },
            DetectionRule {
                id: RuleId::BankReceivership,
                groups: vec![anchor.clone(), TermGroup::of(&["receiver*", "assignee", "assignees", "assigned"])],
                exclude: Vec::new(),
                window: None,
                notes: String::from("bank + receiver / assignee / assigned"),
            },
            DetectionRule {
                id: RuleId::BankPanic,
                groups: vec![
                    TermGroup::of(&["bank", "banks", "banking", "trust co", "trust company", "trust companies", "deposit*"]),
                    TermGroup::of(&["panic*"]),
                ],
                exclude: Vec::new(),
                window: None,
                notes: String::from("bank or deposit + panic"),
            },
            DetectionRule {
                id: RuleId::LargeWithdrawals,
                groups: vec![TermGroup::of(&["deposit*"]), TermGroup::of(&["large"]), TermGroup::of(&["withdraw*"])],
                exclude: Vec::new(),
                window: None,
                notes: String::from("deposit + large + withdraw"),
            },
            DetectionRule {
                id: RuleId::DistressPhrase,
                groups: vec![
                    anchor,
                    TermGroup { terms: owned(&CANONICAL_DISTRESS_PHRASES), extra: owned(&EXTRA_DISTRESS_PHRASES) },
                ],
                exclude: Vec::new(),
                window: None,
                notes: String::from("bank + one of seventeen distress phrases; four canonical, thirteen extra"),
            },
            DetectionRule {
                id: RuleId::SuspensionRuleNotice,
                groups: vec![
                    TermGroup::of(&[
                        "thirty days",
                        "sixty days",
                        "ninety days",
                        "30 days",
                        "60 days",
                        "90 days",
                        "thirty day",
                        "sixty day",
                        "ninety day",
                        "30 day",
                        "60 day",
                        "90 day",
                    ]),
                    TermGroup::of(&["deposit*"]),
                ],
                exclude: Vec::new(),
                window: None,
                notes: String::from("30/60/90-day notice + deposit"),
            },
        ];
        Self {
            cleaner: Cleaner {
                geographic: owned(&[
                    "river bank",
                    "river banks",
                    "snow bank",
                    "snow banks",
                    "sand bank",
                    "sand banks",
                    "creek bank",
                    "canal bank",
                    "west bank",
                    "east bank",
                ]),
                proper_names: owned(&["albert banks", "nathaniel banks", "general banks", "gen banks", "mr banks", "mrs banks"]),
                financial: owned(&["bank loans", "bank loan", "banknote", "banknotes", "bank note", "bank notes", "bank bills"]),
            },
            rules,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuleError {
    #[error("rule {0}: empty term")]
    EmptyTerm(RuleId),
    #[error("rule {0}: no term groups")]
    NoGroups(RuleId),
    #[error("rule {0} defined twice")]
    Duplicate(RuleId),
    #[error("empty removal phrase")]
    EmptyRemoval,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Word(String),
    Prefix(String),
}

impl Piece {
    fn matches(&self, tok: &str) -> bool {
        match self {
            Piece::Word(w) => tok == w,
            Piece::Prefix(p) => tok.starts_with(p.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Pattern(Vec<Piece>);

impl Pattern {
    fn parse(s: &str) -> Option<Self> {
        let mut pieces = Vec::new();
        for part in s.split_whitespace() {
            let lower = part.to_lowercase();
            let piece = match lower.strip_suffix('*') {
                Some(p) => Piece::Prefix(tokenize(p).into_iter().map(|t| t.text).collect()),
                None => {
                    for t in tokenize(&lower) {
                        pieces.push(Piece::Word(t.text.to_string()));
                    }
                    continue;
                }
            };
            pieces.push(piece);
        }
        if pieces.is_empty() {
            None
        } else {
            Some(Pattern(pieces))
        }
    }

    /// Token index ranges `[start, end)` where the pattern matches.
    fn occurrences(&self, toks: &[Token<'_>]) -> Vec<(usize, usize)> {
        let n = self.0.len();
        if toks.len() < n {
            return Vec::new();
        }
        (0..=toks.len() - n)
            .filter(|&i| self.0.iter().zip(&toks[i..i + n]).all(|(p, t)| p.matches(t.text)))
            .map(|i| (i, i + n))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub text: &'a str,
    pub start: usize,
    pub end: usize,
}

/// Maximal runs of alphanumeric characters with their byte offsets.
pub fn tokenize(s: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in s.char_indices() {
        match (c.is_alphanumeric(), start) {
            (true, None) => start = Some(i),
            (false, Some(st)) => {
                out.push(Token { text: &s[st..i], start: st, end: i });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(st) = start {
        out.push(Token { text: &s[st..], start: st, end: s.len() });
    }
    out
}

struct CompiledRule {
    id: RuleId,
    groups: Vec<Vec<Pattern>>,
    exclude: Vec<Pattern>,
    window: Option<usize>,
}

/// A rule set with its patterns parsed, ready to apply.
pub struct CompiledRules {
    removals: Vec<Pattern>,
    rules: Vec<CompiledRule>,
}

impl CompiledRules {
    pub fn new(set: &RuleSet) -> Result<Self, RuleError> {
        let mut removals = Vec::new();
        for r in set.cleaner.geographic.iter().chain(&set.cleaner.proper_names).chain(&set.cleaner.financial) {
            removals.push(Pattern::parse(r).ok_or(RuleError::EmptyRemoval)?);
        }
        let mut seen = BTreeSet::new();
        let mut rules = Vec::new();
        for r in &set.rules {
            if !seen.insert(r.id) {
                return Err(RuleError::Duplicate(r.id));
            }
            if r.groups.is_empty() {
                return Err(RuleError::NoGroups(r.id));
            }
            let mut groups = Vec::new();
            for g in &r.groups {
                let pats: Option<Vec<Pattern>> = g.terms.iter().chain(&g.extra).map(|t| Pattern::parse(t)).collect();
                let pats = pats.ok_or(RuleError::EmptyTerm(r.id))?;
                if pats.is_empty() {
                    return Err(RuleError::EmptyTerm(r.id));
                }
                groups.push(pats);
            }
            let exclude: Option<Vec<Pattern>> = r.exclude.iter().map(|t| Pattern::parse(t)).collect();
            rules.push(CompiledRule {
                id: r.id,
                groups,
                exclude: exclude.ok_or(RuleError::EmptyTerm(r.id))?,
                window: r.window,
            });
        }
        Ok(Self { removals, rules })
    }

    pub fn default_rules() -> Self {
        Self::new(&RuleSet::default()).expect("shipped rule set compiles")
    }

    /// Case-folds, deletes configured unrelated phrases until none remain,
    /// and collapses whitespace.
    pub fn clean_text(&self, text: &str) -> String {
        let mut cur = collapse(&text.to_lowercase());
        loop {
            let toks = tokenize(&cur);
            let mut cut: Vec<(usize, usize)> = Vec::new();
            for p in &self.removals {
                for (a, b) in p.occurrences(&toks) {
                    cut.push((toks[a].start, toks[b - 1].end));
                }
            }
            if cut.is_empty() {
                return cur;
            }
            cut.sort_unstable();
            let mut next = String::with_capacity(cur.len());
            let mut pos = 0;
            for (s, e) in cut {
                if s >= pos {
                    next.push_str(&cur[pos..s]);
                    next.push(' ');
                    pos = e;
                } else if e > pos {
                    pos = e;
                }
            }
            next.push_str(&cur[pos..]);
            cur = collapse(&next);
        }
    }

    /// Rules that fire on already-cleaned text, with the byte spans of the
    /// term occurrences that satisfied them.
    pub fn match_spans(&self, cleaned: &str) -> Vec<(RuleId, (usize, usize))> {
        let lowered;
        let text = if cleaned.chars().any(char::is_uppercase) {
            lowered = cleaned.to_lowercase();
            lowered.as_str()
        } else {
            cleaned
        };
        let toks = tokenize(text);
        let mut out = Vec::new();
        for rule in &self.rules {
            let mut blocked = vec![false; toks.len()];
            for ex in &rule.exclude {
                for (a, b) in ex.occurrences(&toks) {
                    blocked[a..b].iter_mut().for_each(|x| *x = true);
                }
            }
            let group_hits: Vec<Vec<(usize, usize)>> = rule
                .groups
                .iter()
                .map(|pats| {
                    let mut v: Vec<(usize, usize)> = pats
                        .iter()
                        .flat_map(|p| p.occurrences(&toks))
                        .filter(|&(a, b)| !blocked[a..b].iter().any(|&x| x))
                        .collect();
                    v.sort_unstable();
                    v.dedup();
                    v
                })
                .collect();
            if group_hits.iter().any(|g| g.is_empty()) {
                continue;
            }
            let used: Vec<(usize, usize)> = match rule.window {
                None => group_hits.concat(),
                Some(w) => {
                    let mut used = Vec::new();
                    for &anchor in &group_hits[0] {
                        let near: Vec<Vec<(usize, usize)>> = group_hits[1..]
                            .iter()
                            .map(|g| g.iter().copied().filter(|&(a, _)| a.abs_diff(anchor.0) <= w).collect())
                            .collect();
                        if near.iter().all(|g: &Vec<_>| !g.is_empty()) {
                            used.push(anchor);
                            used.extend(near.into_iter().flatten());
                        }
                    }
                    used
                }
            };
            if used.is_empty() {
                continue;
            }
            let mut spans: Vec<(usize, usize)> = used.iter().map(|&(a, b)| (toks[a].start, toks[b - 1].end)).collect();
            spans.sort_unstable();
            spans.dedup();
            out.extend(spans.into_iter().map(|s| (rule.id, s)));
        }
        out
    }

    pub fn match_rules(&self, cleaned: &str) -> BTreeSet<RuleId> {
        self.match_spans(cleaned).into_iter().map(|(r, _)| r).collect()
    }

    pub fn screen(&self, article: &ArticleRecord) -> Option<FilterHit> {
        let cleaned = self.clean_text(&article.text);
        let spans = self.match_spans(&cleaned);
        if spans.is_empty() {
            return None;
        }
        Some(FilterHit {
            article_id: article.article_id.clone(),
            matched_rules: spans.iter().map(|(r, _)| *r).collect(),
            matched_spans: spans,
            cleaned_text_hash: sha256_hex(cleaned.as_bytes()),
        })
    }
}

fn collapse(s: &str) -> String {
    crate::corpus::normalize_whitespace(s)
}

/// Cleans with the shipped removal lists.
pub fn clean_text(text: &str) -> String {
    CompiledRules::default_rules().clean_text(text)
}

/// Matches the shipped rules.
pub fn match_rules(cleaned: &str) -> BTreeSet<RuleId> {
    CompiledRules::default_rules().match_rules(cleaned)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterHit {
    pub article_id: String,
    pub matched_rules: BTreeSet<RuleId>,
    /// Byte offsets into the cleaned text.
    pub matched_spans: Vec<(RuleId, (usize, usize))>,
    pub cleaned_text_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub hits: Vec<FilterHit>,
    pub n_articles: usize,
    pub pass_rate: f64,
}

pub fn filter_collection(articles: &[ArticleRecord], rules: &CompiledRules) -> FilterReport {
    let mut hits: Vec<FilterHit> = articles.iter().filter_map(|a| rules.screen(a)).collect();
    hits.sort_by(|a, b| a.article_id.cmp(&b.article_id));
    let pass_rate = if articles.is_empty() { 0.0 } else { hits.len() as f64 / articles.len() as f64 };
    FilterReport { hits, n_articles: articles.len(), pass_rate }
}

/// Human-readable summary of the rule table.
pub fn describe(set: &RuleSet) -> String {
    let mut s = String::new();
    for r in &set.rules {
        let groups: Vec<String> = r
            .groups
            .iter()
            .map(|g| format!("({})", g.terms.iter().chain(&g.extra).cloned().collect::<Vec<_>>().join(" | ")))
            .collect();
        s.push_str(&format!("{}: {}\n", r.id, groups.join(" + ")));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rules_of(s: &str) -> BTreeSet<RuleId> {
        let c = CompiledRules::default_rules();
        c.match_rules(&c.clean_text(s))
    }

    #[test]
    fn snow_bank_removed() {
        let c = clean_text("the snow bank melted");
        assert!(!c.contains("snow bank"));
        assert!(match_rules(&c).is_empty());
        assert_eq!(clean_text(""), "");
    }

    #[test]
    fn bank_loans_removed_but_not_bank_suspended() {
        let c = clean_text("Bank loans rose; the bank suspended payment");
        assert!(!c.contains("bank loans"));
        assert!(c.contains("bank suspended"));
        assert_eq!(match_rules(&c), [RuleId::BankSuspension].into_iter().collect());
    }

    #[test]
    fn reference_examples() {
        assert_eq!(rules_of("a run on the First National Bank began"), [RuleId::BankRun].into_iter().collect());
        assert!(rules_of("trains are running late near the depot").is_empty());
        assert_eq!(
            rules_of("the trust co faced a heavy run"),
            [RuleId::BankRun, RuleId::DistressPhrase].into_iter().collect()
        );
    }

    #[test]
    fn exclusions_only_block_overlapping_terms() {
        assert!(rules_of("the bank reported that trains are running late").is_empty());
        assert!(rules_of("the bank announced the suspension of production").is_empty());
        assert_eq!(
            rules_of("the suspension of production led to a suspension at the bank"),
            [RuleId::BankSuspension].into_iter().collect()
        );
    }

    #[test]
    fn word_boundaries() {
        assert!(rules_of("the bank runner arrived").is_empty());
        assert!(rules_of("bankrupt runners").is_empty());
    }

    #[test]
    fn notice_and_withdrawal_rules() {
        assert_eq!(
            rules_of("Sixty days notice will be required on all deposits"),
            [RuleId::SuspensionRuleNotice].into_iter().collect()
        );
        assert_eq!(
            rules_of("depositors made large withdrawals"),
            [RuleId::LargeWithdrawals].into_iter().collect()
        );
        assert_eq!(rules_of("Panic among depositors"), [RuleId::BankPanic].into_iter().collect());
        assert_eq!(
            rules_of("an assignee was appointed for the banking house"),
            [RuleId::BankReceivership].into_iter().collect()
        );
    }

    #[test]
    fn seventeen_distress_phrases() {
        let set = RuleSet::default();
        let r = set.rules.iter().find(|r| r.id == RuleId::DistressPhrase).unwrap();
        assert_eq!(r.groups[1].terms.len(), 4);
        assert_eq!(r.groups[1].terms.len() + r.groups[1].extra.len(), 17);
    }

    #[test]
    fn window_limits_distance() {
        let mut set = RuleSet::default();
        set.rules.retain(|r| r.id == RuleId::BankRun);
        set.rules[0].window = Some(3);
        let c = CompiledRules::new(&set).unwrap();
        assert!(!c.match_rules("a run on the bank").is_empty());
        assert!(c.match_rules("bank one two three four five run").is_empty());
    }

    #[test]
    fn spans_are_inside_text() {
        let c = CompiledRules::default_rules();
        let t = c.clean_text("The Trust Company faced a HEAVY RUN; depositors crowded");
        for (_, (a, b)) in c.match_spans(&t) {
            assert!(a < b && b <= t.len());
        }
    }

    #[test]
    fn pass_rate_of_empty_corpus() {
        let r = filter_collection(&[], &CompiledRules::default_rules());
        assert_eq!(r.pass_rate, 0.0);
    }
}
