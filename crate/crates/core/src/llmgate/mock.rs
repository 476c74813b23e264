use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};

use super::{article_digest, episode_digest, ClientError, LlmClient, LlmRequest, Stage};
use crate::corpus::ArticleRecord;

/// Replays canned replies keyed by input digest. Unknown inputs are refused,
/// which the gate reports as a schema violation.
#[derive(Debug, Clone, Default)]
pub struct MockClient {
    fixtures: BTreeMap<String, String>,
    name: String,
}

impl MockClient {
    pub fn new() -> Self {
        Self { fixtures: BTreeMap::new(), name: String::from("mock") }
    }

    pub fn named(name: &str) -> Self {
        Self { fixtures: BTreeMap::new(), name: name.to_string() }
    }

    pub fn insert(&mut self, digest: String, reply: String) {
        self.fixtures.insert(digest, reply);
    }

    pub fn insert_article(&mut self, stage: Stage, article: &ArticleRecord, reply: &str) {
        self.insert(article_digest(stage, article), reply.to_string());
    }

    pub fn insert_episode(&mut self, stage: Stage, episode_id: &str, articles: &[ArticleRecord], reply: &str) {
        self.insert(episode_digest(stage, episode_id, articles), reply.to_string());
    }

    pub fn len(&self) -> usize {
        self.fixtures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixtures.is_empty()
    }

    pub fn fixtures(&self) -> &BTreeMap<String, String> {
        &self.fixtures
    }

    pub fn extend(&mut self, other: MockClient) {
        self.fixtures.extend(other.fixtures);
    }
}

impl FromIterator<(String, String)> for MockClient {
    fn from_iter<I: IntoIterator<Item = (String, String)>>(iter: I) -> Self {
        Self { fixtures: iter.into_iter().collect(), name: String::from("mock") }
    }
}

impl LlmClient for MockClient {
    fn complete(&self, request: &LlmRequest) -> Result<String, ClientError> {
        self.fixtures
            .get(&request.input_digest)
            .cloned()
            .ok_or_else(|| ClientError::NoFixture(request.input_digest.clone()))
    }

    fn name(&self) -> &str {
        &self.name
    }
}
