//! Pipeline configuration, read from TOML. Relative paths are resolved
//! against the directory holding the config file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use bankrun_core::corpus::SynthSpec;
use bankrun_core::digest::sha256_hex;
use bankrun_core::entities::{CharterType, MatchConfig};
use bankrun_core::episodes::{GroupingRule, SelectionPolicy, DEFAULT_CRISIS_YEARS, DEFAULT_OCC_WINDOW_DAYS};
use bankrun_core::llmgate::RetryPolicy;
use bankrun_core::metrics::quantile::CutMode;
use bankrun_core::metrics::IndexConfig;
use bankrun_core::panel::{LiquidDefinition, Rescale};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::Format;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Where stage artifacts and provenance go.
    pub work_dir: PathBuf,
    pub articles: Option<PathBuf>,
    pub articles_format: Option<Format>,
    pub rules: Option<PathBuf>,
    pub prompts_dir: Option<PathBuf>,
    pub registry: Option<PathBuf>,
    pub gazetteer: Option<PathBuf>,
    pub city_crosswalk: Option<PathBuf>,
    pub name_crosswalk: Option<PathBuf>,
    pub manual_matches: Option<PathBuf>,
    pub occ: Option<PathBuf>,
    pub balances: Option<PathBuf>,
    pub covariates: Option<PathBuf>,
    pub state_business: Option<PathBuf>,
    pub state_quarters: Option<PathBuf>,
    /// `year,banks` rows used as rate denominators.
    pub bank_counts: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            work_dir: PathBuf::from("work"),
            articles: None,
            articles_format: None,
            rules: None,
            prompts_dir: None,
            registry: None,
            gazetteer: None,
            city_crosswalk: None,
            name_crosswalk: None,
            manual_matches: None,
            occ: None,
            balances: None,
            covariates: None,
            state_business: None,
            state_quarters: None,
            bank_counts: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ClientMode {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClientConfig {
    pub mode: ClientMode,
    /// Replay fixtures for mock mode.
    pub fixtures: Option<PathBuf>,
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token. The token
    /// itself is never written anywhere.
    pub token_env: String,
    pub timeout_secs: u64,
    pub max_concurrent: usize,
    pub temperature: f64,
    pub max_tokens: u32,
    pub retry: RetryPolicy,
    /// Request/response log, one JSON object per call.
    pub audit_log: bool,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            mode: ClientMode::Mock,
            fixtures: None,
            base_url: String::from("https://api.openai.com/v1/chat/completions"),
            model: String::from("gpt-4o-mini"),
            token_env: String::from("BANKRUN_LLM_TOKEN"),
            timeout_secs: 60,
            max_concurrent: 4,
            temperature: 0.0,
            max_tokens: 2048,
            retry: RetryPolicy::default(),
            audit_log: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    #[serde(flatten)]
    pub primary: ClientConfig,
    /// Second model for the episode stages. Disagreements are flagged for review.
    pub secondary: Option<ClientConfig>,
    /// Run the episode, response and non-fundamental stages while building episodes.
    pub episode_stages: bool,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig { primary: ClientConfig::default(), secondary: None, episode_stages: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    pub grouping: GroupingRule,
    pub occ_window_days: i64,
    pub selection: SelectionPolicy,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            grouping: GroupingRule::default(),
            occ_window_days: DEFAULT_OCC_WINDOW_DAYS,
            selection: SelectionPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TabulateConfig {
    pub crisis_years: BTreeSet<i32>,
    pub charter: Option<CharterType>,
}

impl Default for TabulateConfig {
    fn default() -> Self {
        TabulateConfig { crisis_years: DEFAULT_CRISIS_YEARS.into_iter().collect(), charter: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PanelSettings {
    pub liquid: LiquidDefinition,
    pub rescale: Rescale,
    pub cut_mode: CutMode,
    pub index: IndexConfig,
    /// Keep only banks of this charter.
    pub charter: Option<CharterType>,
}

impl Default for PanelSettings {
    fn default() -> Self {
        PanelSettings {
            liquid: LiquidDefinition::default(),
            rescale: Rescale::default(),
            cut_mode: CutMode::default(),
            index: IndexConfig::default(),
            charter: Some(CharterType::National),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub dk_bandwidth: usize,
    /// Presets estimated by the `fit` stage.
    pub presets: Vec<String>,
    /// Presets rendered by `pipeline`.
    pub reports: Vec<String>,
    pub city_max_horizon: i32,
    /// Month-level crisis series for the crisis-correlation preset.
    pub panic_months: Option<Vec<(i32, u32)>>,
    /// (state FIPS, year, month)
    pub regional_panics: Option<Vec<(u8, i32, u32)>>,
    /// Daily horizon of the run-to-failure curve.
    pub daily_horizon: i32,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            dk_bandwidth: 3,
            presets: ["table4", "table5", "fig5"].into_iter().map(String::from).collect(),
            reports: ["table1", "fig1", "fig4", "fig6", "table4", "table5", "fig5"].into_iter().map(String::from).collect(),
            city_max_horizon: 5,
            panic_months: None,
            regional_panics: None,
            daily_horizon: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub llm: LlmConfig,
    pub matching: MatchConfig,
    pub episodes: EpisodeConfig,
    pub tabulate: TabulateConfig,
    pub panel: PanelSettings,
    pub analysis: AnalysisConfig,
    pub synth: Option<SynthSpec>,
    pub seed: Option<u64>,
    /// Worker threads for intra-stage parallelism.
    pub jobs: Option<usize>,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::ConfigInvalid(format!("config file {} not found", path.display())),
            _ => Error::io(path, e),
        })?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.rebase(&base);
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::ConfigInvalid(m.to_string()));
        if self.llm.primary.max_concurrent == 0 {
            return bad("llm.max_concurrent must be at least 1");
        }
        if self.llm.primary.retry.max_attempts == 0 {
            return bad("llm.retry.max_attempts must be at least 1");
        }
        if self.jobs == Some(0) {
            return bad("jobs must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.matching.acceptance) {
            return bad("matching.acceptance must lie in [0, 1]");
        }
        if self.episodes.occ_window_days < 0 {
            return bad("episodes.occ_window_days must be non-negative");
        }
        if let Some(s) = &self.synth {
            s.validate().map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        }
        Ok(())
    }

    /// Makes every relative path relative to `base`.
    pub fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let p = &mut self.paths;
        fix(&mut p.work_dir);
        for o in [
            &mut p.articles,
            &mut p.rules,
            &mut p.prompts_dir,
            &mut p.registry,
            &mut p.gazetteer,
            &mut p.city_crosswalk,
            &mut p.name_crosswalk,
            &mut p.manual_matches,
            &mut p.occ,
            &mut p.balances,
            &mut p.covariates,
            &mut p.state_business,
            &mut p.state_quarters,
            &mut p.bank_counts,
            &mut self.llm.primary.fixtures,
        ] {
            if let Some(x) = o.as_mut() {
                fix(x);
            }
        }
        if let Some(s) = self.llm.secondary.as_mut().and_then(|s| s.fixtures.as_mut()) {
            fix(s);
        }
    }

    /// Digest of the effective configuration, recorded with every artifact.
    /// Digest of everything that can change outputs; the thread count cannot.
    pub fn digest(&self) -> String {
        let c = PipelineConfig { jobs: None, ..self.clone() };
        sha256_hex(serde_json::to_string(&c).expect("config serializes").as_bytes())
    }

    pub fn work(&self, file: &str) -> PathBuf {
        self.paths.work_dir.join(file)
    }

    pub fn mock_fixtures(&self) -> PathBuf {
        self.llm.primary.fixtures.clone().unwrap_or_else(|| self.work("mock_fixtures.jsonl"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(PipelineConfig::from_toml("").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(PipelineConfig::from_toml("[paths]\nwork = \"x\"\n"), Err(Error::ConfigInvalid(_))));
        assert!(matches!(PipelineConfig::from_toml("[llm]\nmax_concurrent = 0\n"), Err(Error::ConfigInvalid(_))));
    }

    #[test]
    fn sections_parse() {
        let cfg = PipelineConfig::from_toml(
            r#"
seed = 7
[paths]
work_dir = "out"
registry = "banks.csv"
[llm]
mode = "http"
model = "m"
max_concurrent = 2
episode_stages = false
[llm.retry]
max_attempts = 3
initial_backoff_ms = 10
multiplier = 2.0
max_backoff_ms = 100
[episodes]
grouping = { rule = "total_span", days = 365 }
occ_window_days = 540
[panel]
rescale = "divide_by_max"
cut_mode = "full_sample"
[tabulate]
crisis_years = [1893, 1907]
"#,
        )
        .unwrap();
        assert_eq!(cfg.llm.primary.mode, ClientMode::Http);
        assert_eq!(cfg.llm.primary.retry.max_attempts, 3);
        assert_eq!(cfg.episodes.grouping, GroupingRule::TotalSpan(365));
        assert_eq!(cfg.panel.rescale, Rescale::DivideByMax);
        assert_eq!(cfg.tabulate.crisis_years.len(), 2);
        let mut c = cfg.clone();
        c.rebase(Path::new("/base"));
        assert_eq!(c.paths.registry.unwrap(), Path::new("/base/banks.csv"));
        assert_eq!(c.paths.work_dir, Path::new("/base/out"));
    }
}
