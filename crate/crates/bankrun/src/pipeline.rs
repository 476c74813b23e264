//! Stages, their artifacts, dependency checks and provenance.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use bankrun_core::corpus::ArticleRecord;
use bankrun_core::entities::{ResolvedEvent, CharterType};
use bankrun_core::episodes::{
    classify_all, counts_csv, group_events, merge_occ, select_articles, standard_rows, tabulate, tabulate_rates, Counts,
    DistressEpisode, EpisodeType, OccRecord, SelectionPolicy,
};
use bankrun_core::llmgate::{
    cross_check, ArticleEvent, EpisodeInput, EventType, Extraction, LlmError, LlmGate, NoSleep, RejectedEvent, ScreenVerdict,
    Sleeper, TriState, MAX_EPISODE_ARTICLES,
};
use bankrun_core::llmgate::prompts::PromptSet;
use bankrun_core::metrics::{fundamentals_index, IndexRow};
use bankrun_core::panel::{attach_covariates, build_panel, BalanceSheet, BankYearRow, CovariateRow, PanelConfig, StateBusinessRow};
use bankrun_core::textfilter::{CompiledRules, FilterHit};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::client::{build_client, AuditEntry, Audited, Dyn, StdSleeper};
use crate::config::{ClientConfig, ClientMode, PipelineConfig};
use crate::error::{Error, Result};
use crate::inputs::{load_bank_counts, load_gazetteer, load_optional, load_registry};
use crate::io::{file_digest, load_articles, read_jsonl_strict, read_table, to_jsonl, write_atomic, write_csv, write_jsonl, Format};
use crate::report::{self, Need, PresetData};
use crate::rules::load_rules;

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Artifact names inside the work directory.
pub mod files {
    pub const ARTICLES: &str = "articles.jsonl";
    pub const INGEST_ERRORS: &str = "ingest_errors.jsonl";
    pub const HITS: &str = "hits.jsonl";
    pub const SCREENED: &str = "screened.jsonl";
    pub const EVENTS: &str = "events.jsonl";
    pub const REJECTED: &str = "extract_rejected.jsonl";
    pub const EXTRACT_ERRORS: &str = "extract_errors.jsonl";
    pub const RESOLVED: &str = "resolved.jsonl";
    pub const UNMATCHED: &str = "unmatched.jsonl";
    pub const EPISODES: &str = "episodes.jsonl";
    pub const TABLE1: &str = "table1.csv";
    pub const TABLE1_RATES: &str = "table1_rates.csv";
    pub const PANEL: &str = "panel.csv";
    pub const PANEL_REPORT: &str = "panel_report.json";
    pub const PROVENANCE: &str = "provenance.jsonl";
    pub const MOCK_FIXTURES: &str = "mock_fixtures.jsonl";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageName {
    Ingest,
    Screen,
    Extract,
    Resolve,
    Episodes,
    Tabulate,
    Panel,
    Fit,
    Report,
    Pipeline,
}

impl StageName {
    pub fn as_str(self) -> &'static str {
        match self {
            StageName::Ingest => "ingest",
            StageName::Screen => "screen",
            StageName::Extract => "extract",
            StageName::Resolve => "resolve",
            StageName::Episodes => "episodes",
            StageName::Tabulate => "tabulate",
            StageName::Panel => "panel",
            StageName::Fit => "fit",
            StageName::Report => "report",
            StageName::Pipeline => "pipeline",
        }
    }
}

/// Stage that writes a work-directory artifact.
pub fn producer(file: &str) -> StageName {
    use files::*;
    match file {
        ARTICLES | INGEST_ERRORS => StageName::Ingest,
        HITS => StageName::Screen,
        SCREENED | EVENTS | REJECTED | EXTRACT_ERRORS => StageName::Extract,
        RESOLVED | UNMATCHED => StageName::Resolve,
        EPISODES => StageName::Episodes,
        TABLE1 | TABLE1_RATES => StageName::Tabulate,
        PANEL | PANEL_REPORT => StageName::Panel,
        _ => StageName::Fit,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRef {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmMeta {
    pub client: String,
    pub mode: ClientMode,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub prompts_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secondary_model: Option<String>,
}

/// One line of `provenance.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seq: usize,
    pub stage: StageName,
    pub tool_version: String,
    pub config_sha256: String,
    pub started_at: String,
    pub finished_at: String,
    pub status: String,
    pub inputs: Vec<FileRef>,
    pub outputs: Vec<FileRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub llm: Option<LlmMeta>,
    #[serde(default)]
    pub summary: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Default)]
struct Trace {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    summary: Map<String, Value>,
    notes: Vec<String>,
    llm: Option<LlmMeta>,
}

impl Trace {
    fn input(&mut self, p: &Path) {
        if !self.inputs.iter().any(|x| x == p) {
            self.inputs.push(p.to_path_buf());
        }
    }

    fn output(&mut self, p: &Path) {
        if !self.outputs.iter().any(|x| x == p) {
            self.outputs.push(p.to_path_buf());
        }
    }

    fn put(&mut self, k: &str, v: impl Serialize) {
        self.summary.insert(k.to_string(), serde_json::to_value(v).expect("summary values serialize"));
    }
}

/// Which calls the extract stage makes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum ExtractMode {
    /// Quick screen, then events for kept articles.
    #[default]
    All,
    Quick,
    /// Events for articles a previous quick run kept.
    Events,
}

#[derive(Debug, Clone, Default)]
pub struct ExtractArgs {
    pub mode: ExtractMode,
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Client configuration replacing `[llm]`.
    pub client: Option<PathBuf>,
}

#[derive(Debug, Clone, Default)]
pub struct EpisodesArgs {
    /// Resolved events in place of the resolve stage's output.
    pub events: Option<PathBuf>,
    pub occ: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Screened {
    pub article_id: String,
    #[serde(flatten)]
    pub verdict: ScreenVerdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallError {
    pub subject_id: String,
    pub stage: String,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub jobs: Option<usize>,
    /// `Some(None)`: force replay fixtures from the configured path.
    pub mock_llm: Option<Option<PathBuf>>,
    pub seed: Option<u64>,
}

pub struct Runner {
    pub cfg: PipelineConfig,
    pool: rayon::ThreadPool,
    mock: Option<Option<PathBuf>>,
    config_digest: String,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn data(e: impl std::fmt::Display) -> Error {
    Error::Data(e.to_string())
}

impl Runner {
    pub fn new(mut cfg: PipelineConfig, opts: RunOptions) -> Result<Self> {
        if opts.seed.is_some() {
            cfg.seed = opts.seed;
        }
        if opts.jobs.is_some() {
            cfg.jobs = opts.jobs;
        }
        let jobs = cfg.jobs.unwrap_or(1);
        if jobs == 0 {
            return Err(Error::ConfigInvalid(String::from("--jobs must be at least 1")));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::ConfigInvalid(format!("thread pool: {e}")))?;
        let config_digest = cfg.digest();
        Ok(Runner { cfg, pool, mock: opts.mock_llm, config_digest })
    }

    pub fn work(&self, file: &str) -> PathBuf {
        self.cfg.work(file)
    }

    /// Order-preserving parallel map on the stage pool.
    fn par_map<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
        self.pool.install(|| items.par_iter().map(f).collect())
    }

    /// A work artifact another stage must have written.
    fn need(&self, file: &str) -> Result<PathBuf> {
        let p = self.work(file);
        if p.is_file() {
            Ok(p)
        } else {
            Err(Error::MissingDependency { stage: producer(file).as_str().to_string(), path: p })
        }
    }

    fn configured<'a>(&self, p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        p.as_deref().ok_or_else(|| Error::ConfigInvalid(format!("paths.{key} is not set")))
    }

    fn rel(&self, p: &Path) -> String {
        match p.strip_prefix(&self.cfg.paths.work_dir) {
            Ok(r) => r.to_string_lossy().replace('\\', "/"),
            Err(_) => p.to_string_lossy().into_owned(),
        }
    }

    fn refs(&self, paths: &[PathBuf]) -> Result<Vec<FileRef>> {
        paths.iter().map(|p| Ok(FileRef { path: self.rel(p), sha256: file_digest(p)? })).collect()
    }

    pub fn read_provenance(&self) -> Result<Vec<Provenance>> {
        let p = self.work(files::PROVENANCE);
        if !p.exists() {
            return Ok(Vec::new());
        }
        read_jsonl_strict(&p)
    }

    fn append_provenance(&self, mut rec: Provenance) -> Result<()> {
        let p = self.work(files::PROVENANCE);
        let mut bytes = match std::fs::read(&p) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(Error::io(&p, e)),
        };
        rec.seq = bytes.iter().filter(|&&b| b == b'\n').count() + 1;
        bytes.extend_from_slice(to_jsonl(std::slice::from_ref(&rec)).as_bytes());
        write_atomic(&p, &bytes)
    }

    /// Runs `body` and records what it read and wrote. Failed runs are
    /// recorded too, without outputs.
    fn traced(&self, stage: StageName, body: impl FnOnce(&mut Trace) -> Result<()>) -> Result<()> {
        let started_at = now();
        let mut t = Trace::default();
        let out = body(&mut t);
        let (status, inputs, outputs) = match &out {
            Ok(()) => (String::from("ok"), self.refs(&t.inputs)?, self.refs(&t.outputs)?),
            Err(e) => {
                let inputs = t.inputs.iter().filter(|p| p.is_file()).cloned().collect::<Vec<_>>();
                (format!("failed: {e}"), self.refs(&inputs)?, Vec::new())
            }
        };
        if matches!(out, Err(Error::MissingDependency { .. })) && !self.cfg.paths.work_dir.exists() {
            return out;
        }
        self.append_provenance(Provenance {
            seq: 0,
            stage,
            tool_version: TOOL_VERSION.to_string(),
            config_sha256: self.config_digest.clone(),
            started_at,
            finished_at: now(),
            status,
            inputs,
            outputs,
            llm: t.llm,
            summary: t.summary,
            notes: t.notes,
        })?;
        out
    }

    fn write_out<T: Serialize>(&self, t: &mut Trace, path: PathBuf, items: &[T]) -> Result<()> {
        write_jsonl(&path, items)?;
        t.output(&path);
        Ok(())
    }

    fn read_articles(&self, t: &mut Trace) -> Result<Vec<ArticleRecord>> {
        let p = self.need(files::ARTICLES)?;
        t.input(&p);
        read_jsonl_strict(&p)
    }

    fn read_episodes(&self, t: &mut Trace, input: Option<&Path>) -> Result<Vec<DistressEpisode>> {
        let p = match input {
            Some(p) => p.to_path_buf(),
            None => self.need(files::EPISODES)?,
        };
        t.input(&p);
        read_jsonl_strict(&p)
    }

    // ---- ingest

    pub fn ingest(&self) -> Result<()> {
        self.traced(StageName::Ingest, |t| {
            let src = self.configured(&self.cfg.paths.articles, "articles")?;
            let fmt = self.cfg.paths.articles_format.unwrap_or_else(|| Format::from_path(src));
            t.input(src);
            let load = load_articles(src, fmt)?;
            t.put("n_articles", load.articles.len());
            t.put("n_rejected", load.errors.len());
            self.write_out(t, self.work(files::ARTICLES), &load.articles)?;
            self.write_out(t, self.work(files::INGEST_ERRORS), &load.errors)
        })
    }

    // ---- screen

    pub fn screen(&self) -> Result<()> {
        self.traced(StageName::Screen, |t| {
            let articles = self.read_articles(t)?;
            if let Some(p) = &self.cfg.paths.rules {
                t.input(p);
            }
            let set = load_rules(self.cfg.paths.rules.as_deref())?;
            let rules = CompiledRules::new(&set).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
            let mut hits: Vec<FilterHit> = self.par_map(&articles, |a| rules.screen(a)).into_iter().flatten().collect();
            hits.sort_by(|a, b| a.article_id.cmp(&b.article_id));
            t.put("n_articles", articles.len());
            t.put("n_hits", hits.len());
            t.put("rules_sha256", bankrun_core::digest::sha256_hex(serde_json::to_string(&set).unwrap().as_bytes()));
            self.write_out(t, self.work(files::HITS), &hits)
        })
    }

    // ---- model clients

    fn prompts(&self, t: &mut Trace) -> Result<PromptSet> {
        let mut set = PromptSet::default();
        if let Some(dir) = &self.cfg.paths.prompts_dir {
            for f in PromptSet::FILES {
                let p = dir.join(f);
                if p.is_file() {
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                    *set.get_mut(f).expect("known prompt file") = text;
                    t.input(&p);
                }
            }
        }
        Ok(set)
    }

    fn fixtures_path(&self, cfg: &ClientConfig) -> PathBuf {
        match &self.mock {
            Some(Some(p)) => p.clone(),
            _ => cfg.fixtures.clone().unwrap_or_else(|| self.work(files::MOCK_FIXTURES)),
        }
    }

    fn open_client(&self, cfg: &ClientConfig, name: &str, primary: bool, t: &mut Trace) -> Result<(Audited<Dyn>, bool)> {
        let mock = cfg.mode == ClientMode::Mock || (primary && self.mock.is_some());
        let fixtures = mock.then(|| if primary { self.fixtures_path(cfg) } else { cfg.fixtures.clone().unwrap_or_default() });
        if let Some(f) = &fixtures {
            if f.as_os_str().is_empty() {
                return Err(Error::ConfigInvalid(String::from("secondary mock client has no fixtures file")));
            }
            t.input(f);
        }
        let c = build_client(cfg, fixtures.as_deref(), name)?;
        Ok((Audited::new(Dyn(c)), mock))
    }

    fn llm_meta(&self, cfg: &ClientConfig, mock: bool, prompts: &PromptSet, name: &str) -> LlmMeta {
        LlmMeta {
            client: name.to_string(),
            mode: if mock { ClientMode::Mock } else { ClientMode::Http },
            model: cfg.model.clone(),
            temperature: cfg.temperature,
            max_tokens: cfg.max_tokens,
            prompts_sha256: prompts.digest(),
            secondary_model: self.cfg.llm.secondary.as_ref().map(|s| s.model.clone()),
        }
    }

    fn write_audit(&self, t: &mut Trace, stage: &str, entries: Vec<AuditEntry>, cfg: &ClientConfig) -> Result<()> {
        if cfg.audit_log {
            self.write_out(t, self.work(&format!("audit/{stage}.jsonl")), &entries)?;
        }
        Ok(())
    }

    // ---- extract

    pub fn extract(&self, args: &ExtractArgs) -> Result<()> {
        self.traced(StageName::Extract, |t| {
            let client_cfg = match &args.client {
                Some(p) => {
                    t.input(p);
                    load_client_config(p)?
                }
                None => self.cfg.llm.primary.clone(),
            };
            let articles = self.read_articles(t)?;
            let hits_path = match &args.input {
                Some(p) => p.clone(),
                None => self.need(files::HITS)?,
            };
            t.input(&hits_path);
            let hits: Vec<FilterHit> = read_jsonl_strict(&hits_path)?;
            let wanted: BTreeSet<&str> = match args.mode {
                ExtractMode::Events => {
                    let p = self.need(files::SCREENED)?;
                    t.input(&p);
                    let s: Vec<Screened> = read_jsonl_strict(&p)?;
                    let keep: BTreeSet<String> =
                        s.into_iter().filter(|s| s.verdict == ScreenVerdict::Keep).map(|s| s.article_id).collect();
                    hits.iter().map(|h| h.article_id.as_str()).filter(|id| keep.contains(*id)).collect()
                }
                _ => hits.iter().map(|h| h.article_id.as_str()).collect(),
            };
            let todo: Vec<&ArticleRecord> = articles.iter().filter(|a| wanted.contains(a.article_id.as_str())).collect();

            let prompts = self.prompts(t)?;
            let (client, mock) = self.open_client(&client_cfg, "primary", true, t)?;
            let sleeper: &dyn Sleeper = if mock { &NoSleep } else { &StdSleeper };
            let gate = LlmGate::new(&client, &prompts, sleeper).with_retry(client_cfg.retry);
            t.llm = Some(self.llm_meta(&client_cfg, mock, &prompts, client.name_str()));

            enum Done {
                Verdict(ScreenVerdict, Option<Result<Extraction, LlmError>>),
                Failed(&'static str, LlmError),
            }
            let results: Vec<Done> = self.par_map(&todo, |a| {
                let verdict = match args.mode {
                    ExtractMode::Events => ScreenVerdict::Keep,
                    _ => match gate.quick_screen(a) {
                        Ok(v) => v,
                        Err(e) => return Done::Failed("quick", e),
                    },
                };
                let ex = (verdict == ScreenVerdict::Keep && args.mode != ExtractMode::Quick).then(|| gate.extract_events(a));
                Done::Verdict(verdict, ex)
            });

            let mut screened = Vec::new();
            let mut events: Vec<ArticleEvent> = Vec::new();
            let mut rejected: Vec<RejectedEvent> = Vec::new();
            let mut errors = Vec::new();
            let mut unavailable = None;
            for (a, r) in todo.iter().zip(results) {
                let mut fail = |stage: &str, e: LlmError| {
                    if matches!(e, LlmError::LlmUnavailable { .. }) && unavailable.is_none() {
                        unavailable = Some(e.clone());
                    }
                    errors.push(CallError { subject_id: a.article_id.clone(), stage: stage.to_string(), error: e.to_string() });
                };
                match r {
                    Done::Failed(stage, e) => fail(stage, e),
                    Done::Verdict(v, ex) => {
                        screened.push(Screened { article_id: a.article_id.clone(), verdict: v });
                        match ex {
                            Some(Ok(x)) => {
                                events.extend(x.events);
                                rejected.extend(x.rejected);
                            }
                            Some(Err(e)) => fail("events", e),
                            None => {}
                        }
                    }
                }
            }
            self.write_audit(t, "extract", client.take(), &client_cfg)?;
            if let Some(e) = unavailable {
                return Err(e.into());
            }
            t.put("n_candidates", todo.len());
            t.put("n_kept", screened.iter().filter(|s| s.verdict == ScreenVerdict::Keep).count());
            t.put("n_events", events.len());
            t.put("n_rejected_events", rejected.len());
            t.put("n_call_errors", errors.len());
            if args.mode != ExtractMode::Events {
                self.write_out(t, self.work(files::SCREENED), &screened)?;
            }
            if args.mode != ExtractMode::Quick {
                let out = args.out.clone().unwrap_or_else(|| self.work(files::EVENTS));
                self.write_out(t, out, &events)?;
                self.write_out(t, self.work(files::REJECTED), &rejected)?;
            }
            self.write_out(t, self.work(files::EXTRACT_ERRORS), &errors)
        })
    }

    // ---- resolve

    pub fn resolve(&self) -> Result<()> {
        self.traced(StageName::Resolve, |t| {
            let articles = self.read_articles(t)?;
            let ev_path = self.need(files::EVENTS)?;
            t.input(&ev_path);
            let events: Vec<ArticleEvent> = read_jsonl_strict(&ev_path)?;
            let p = &self.cfg.paths;
            let reg_path = self.configured(&p.registry, "registry")?;
            let gaz_path = self.configured(&p.gazetteer, "gazetteer")?;
            for q in [Some(reg_path), Some(gaz_path), p.name_crosswalk.as_deref(), p.manual_matches.as_deref(), p.city_crosswalk.as_deref()]
                .into_iter()
                .flatten()
            {
                t.input(q);
            }
            let registry = load_registry(reg_path, p.name_crosswalk.as_deref(), p.manual_matches.as_deref())?;
            let (gaz, gaz_report) = load_gazetteer(gaz_path, p.city_crosswalk.as_deref())?;
            let place: BTreeMap<&str, (&str, &str)> =
                articles.iter().map(|a| (a.article_id.as_str(), (a.state_raw.as_str(), a.city_raw.as_str()))).collect();
            let resolved: Vec<ResolvedEvent> = self.par_map(&events, |e| {
                let pl = place.get(e.article_id.as_str()).copied().unwrap_or(("", ""));
                bankrun_core::entities::resolve_event(e, pl, &registry, &gaz, &self.cfg.matching)
            });
            let unmatched: Vec<&ResolvedEvent> = resolved.iter().filter(|r| r.bank_id.is_none()).collect();
            let n = resolved.len();
            t.put("n_events", n);
            t.put("n_matched", n - unmatched.len());
            t.put("match_rate", if n == 0 { 0.0 } else { (n - unmatched.len()) as f64 / n as f64 });
            t.put("gazetteer", &gaz_report);
            self.write_out(t, self.work(files::RESOLVED), &resolved)?;
            self.write_out(t, self.work(files::UNMATCHED), &unmatched)
        })
    }

    // ---- episodes

    pub fn episodes(&self, args: &EpisodesArgs) -> Result<()> {
        self.traced(StageName::Episodes, |t| {
            let rpath = match &args.events {
                Some(p) => p.clone(),
                None => self.need(files::RESOLVED)?,
            };
            t.input(&rpath);
            let resolved: Vec<ResolvedEvent> = read_jsonl_strict(&rpath)?;
            let matched: Vec<ResolvedEvent> = resolved.into_iter().filter(|r| r.bank_id.is_some()).collect();
            let mut eps = group_events(&matched, self.cfg.episodes.grouping).map_err(data)?;
            let mut hints: BTreeMap<String, EpisodeType> = BTreeMap::new();

            if self.cfg.llm.episode_stages && !eps.is_empty() {
                let articles = self.read_articles(t)?;
                hints = self.episode_llm(t, &articles, &mut eps)?;
            }
            let occ_path = args.occ.as_ref().or(self.cfg.paths.occ.as_ref());
            let occ: Vec<OccRecord> = load_optional(occ_path.map(PathBuf::as_path))?;
            if let Some(p) = occ_path {
                t.input(p);
                eps = merge_occ(eps, &occ, self.cfg.episodes.occ_window_days);
            }
            let inconsistent = classify_all(&mut eps);
            for ep in eps.iter_mut() {
                if let Some(h) = hints.get(&ep.episode_id) {
                    if *h != ep.episode_type {
                        ep.flag_review(&format!("model suggested type {h}, events imply {}", ep.episode_type));
                    }
                }
            }
            t.put("n_events", matched.len());
            t.put("n_episodes", eps.len());
            t.put("n_inconsistent", inconsistent);
            t.put("n_needs_review", eps.iter().filter(|e| e.needs_review).count());
            self.write_out(t, args.out.clone().unwrap_or_else(|| self.work(files::EPISODES)), &eps)
        })
    }

    /// Episode-level model calls: joint reading, responses and the
    /// non-fundamental question. Returns the type each episode was given by
    /// the model.
    fn episode_llm(&self, t: &mut Trace, articles: &[ArticleRecord], eps: &mut [DistressEpisode]) -> Result<BTreeMap<String, EpisodeType>> {
        let by_id: BTreeMap<&str, &ArticleRecord> = articles.iter().map(|a| (a.article_id.as_str(), a)).collect();
        let prompts = self.prompts(t)?;
        let pcfg = self.cfg.llm.primary.clone();
        let (client, mock) = self.open_client(&pcfg, "primary", true, t)?;
        let secondary = match &self.cfg.llm.secondary {
            Some(c) => Some((self.open_client(c, "secondary", false, t)?, c.clone())),
            None => None,
        };
        let sleeper: &dyn Sleeper = if mock { &NoSleep } else { &StdSleeper };
        let gate = LlmGate::new(&client, &prompts, sleeper).with_retry(pcfg.retry);
        let gate2 = secondary.as_ref().map(|((c, _), cfg)| LlmGate::new(c, &prompts, sleeper).with_retry(cfg.retry));
        t.llm = Some(self.llm_meta(&pcfg, mock, &prompts, client.name_str()));
        let policy = self.cfg.episodes.selection;

        let results: Vec<EpisodeCalls> = self.par_map(eps, |ep| {
            let selected = episode_articles(ep, &by_id, policy);
            run_episode_calls(&gate, gate2.as_ref(), ep, &selected)
        });

        self.write_audit(t, "episodes", client.take(), &pcfg)?;
        if let Some(((c, _), cfg)) = &secondary {
            if cfg.audit_log {
                self.write_out(t, self.work("audit/episodes_secondary.jsonl"), &c.take())?;
            }
        }
        let mut hints = BTreeMap::new();
        let mut errors = Vec::new();
        for (ep, r) in eps.iter_mut().zip(results) {
            if let Some(e) = r.errors.iter().find(|(_, e)| matches!(e, LlmError::LlmUnavailable { .. })) {
                return Err(e.1.clone().into());
            }
            r.apply(ep);
            if let Some(h) = r.hint {
                hints.insert(ep.episode_id.clone(), h);
            }
            for (stage, e) in r.errors {
                errors.push(CallError { subject_id: ep.episode_id.clone(), stage: stage.to_string(), error: e.to_string() });
            }
        }
        t.put("n_episode_call_errors", errors.len());
        self.write_out(t, self.work("episode_errors.jsonl"), &errors)?;
        Ok(hints)
    }

    // ---- tabulate

    pub fn tabulate(&self, input: Option<&Path>, out: Option<&Path>) -> Result<()> {
        self.traced(StageName::Tabulate, |t| {
            let eps = self.read_episodes(t, input)?;
            let crisis = &self.cfg.tabulate.crisis_years;
            let rows: Vec<(String, Counts)> = standard_rows(crisis, self.cfg.tabulate.charter)
                .into_iter()
                .map(|(l, f)| {
                    let c = tabulate(&eps, &f, crisis);
                    (l, c)
                })
                .collect();
            let path = out.map(Path::to_path_buf).unwrap_or_else(|| self.work(files::TABLE1));
            write_atomic(&path, counts_csv(&rows).as_bytes())?;
            t.output(&path);
            t.put("n_episodes", eps.len());
            t.put("all", rows[0].1);
            if let Some(cp) = &self.cfg.paths.bank_counts {
                t.input(cp);
                let den = load_bank_counts(cp)?;
                let mut rates = Vec::new();
                for (l, f) in standard_rows(crisis, self.cfg.tabulate.charter) {
                    let r = tabulate_rates(&eps, &f, crisis, &den).map_err(data)?;
                    rates.push(RateRow::new(l, r));
                }
                let rp = self.work(files::TABLE1_RATES);
                write_csv(&rp, &rates)?;
                t.output(&rp);
            }
            Ok(())
        })
    }

    // ---- panel

    pub fn panel(&self) -> Result<()> {
        self.traced(StageName::Panel, |t| {
            let eps = self.read_episodes(t, None)?;
            let bpath = self.configured(&self.cfg.paths.balances, "balances")?;
            t.input(bpath);
            let sheets: Vec<BalanceSheet> = read_table(bpath)?;
            let ps = &self.cfg.panel;
            let (mut rows, rep) = build_panel(&sheets, &eps, &PanelConfig { liquid: ps.liquid });
            if let Some(c) = ps.charter {
                rows.retain(|r| r.charter_type == c);
            }
            attach_index(&mut rows, ps.index);
            let p = &self.cfg.paths;
            for q in [&p.covariates, &p.state_business].into_iter().flatten() {
                t.input(q);
            }
            let macros: Vec<CovariateRow> = load_optional(p.covariates.as_deref())?;
            let states: Vec<StateBusinessRow> = load_optional(p.state_business.as_deref())?;
            let cov = attach_covariates(&mut rows, &macros, &states);
            t.put("n_rows", rows.len());
            t.put("n_banks", rows.iter().map(|r| &r.bank_id).collect::<BTreeSet<_>>().len());
            t.put("n_unmatched_episodes", rep.unmatched_episodes.len());
            let path = self.work(files::PANEL);
            write_csv(&path, &rows)?;
            t.output(&path);
            let rp = self.work(files::PANEL_REPORT);
            let body = serde_json::to_string_pretty(&json!({"panel": rep, "covariates": cov})).unwrap() + "\n";
            write_atomic(&rp, body.as_bytes())?;
            t.output(&rp);
            Ok(())
        })
    }

    // ---- fit and report

    fn load_preset_data(&self, t: &mut Trace, preset: &str, need: Need, input: Option<&Path>) -> Result<PresetData> {
        let schema = |e: Error| match e {
            Error::MalformedRecords { reason, .. } => Error::SchemaMismatch(preset.to_string(), reason),
            other => other,
        };
        let mut d = PresetData::default();
        match need {
            Need::Episodes => {
                d.episodes = Some(self.read_episodes(t, input).map_err(schema)?);
                if let Some(cp) = &self.cfg.paths.bank_counts {
                    t.input(cp);
                    d.bank_counts = Some(load_bank_counts(cp)?);
                }
            }
            Need::Panel => {
                let p = match input {
                    Some(p) => p.to_path_buf(),
                    None => self.need(files::PANEL)?,
                };
                t.input(&p);
                d.panel = Some(read_table::<BankYearRow>(&p).map_err(schema)?);
            }
            Need::StateQuarters => {
                let p = match input {
                    Some(p) => p,
                    None => self.configured(&self.cfg.paths.state_quarters, "state_quarters")?,
                };
                t.input(p);
                d.state_quarters = Some(read_table(p).map_err(schema)?);
            }
        }
        Ok(d)
    }

    pub fn fit(&self) -> Result<()> {
        self.traced(StageName::Fit, |t| {
            for name in &self.cfg.analysis.presets {
                let preset = report::lookup(name)?;
                let d = self.load_preset_data(t, name, preset.need, None)?;
                let out = report::compute(preset, &d, &self.cfg)?;
                let path = self.work(&format!("fits/{name}.json"));
                let body = serde_json::to_string_pretty(&out.table).unwrap() + "\n";
                write_atomic(&path, body.as_bytes())?;
                t.output(&path);
            }
            t.put("presets", &self.cfg.analysis.presets);
            Ok(())
        })
    }

    pub fn report(&self, name: &str, input: Option<&Path>) -> Result<()> {
        let preset = report::lookup(name)?;
        self.traced(StageName::Report, |t| {
            let d = self.load_preset_data(t, name, preset.need, input)?;
            let out = report::compute(preset, &d, &self.cfg)?;
            let csv = self.work(&format!("reports/{name}.csv"));
            write_atomic(&csv, out.table.to_csv().as_bytes())?;
            t.output(&csv);
            let svg = self.work(&format!("reports/{name}.svg"));
            write_atomic(&svg, out.svg(preset).as_bytes())?;
            t.output(&svg);
            t.put("preset", name);
            t.put("n_rows", out.table.rows.len());
            Ok(())
        })
    }

    /// Every stage in order. Panel-based stages are skipped when no call
    /// reports are configured.
    pub fn pipeline(&self) -> Result<()> {
        self.ingest()?;
        self.screen()?;
        self.extract(&ExtractArgs::default())?;
        self.resolve()?;
        self.episodes(&EpisodesArgs::default())?;
        self.tabulate(None, None)?;
        let mut skipped = Vec::new();
        let have_panel = self.cfg.paths.balances.is_some();
        if have_panel {
            self.panel()?;
            self.fit()?;
        } else {
            skipped.push(String::from("panel and fit: paths.balances is not set"));
        }
        for name in &self.cfg.analysis.reports {
            let preset = report::lookup(name)?;
            let ok = match preset.need {
                Need::Episodes => true,
                Need::Panel => have_panel,
                Need::StateQuarters => self.cfg.paths.state_quarters.is_some(),
            };
            if ok {
                self.report(name, None)?;
            } else {
                skipped.push(format!("report {name}: inputs not configured"));
            }
        }
        self.traced(StageName::Pipeline, |t| {
            t.notes = skipped;
            Ok(())
        })
    }
}

trait NameStr {
    fn name_str(&self) -> &str;
}

impl<C: bankrun_core::llmgate::LlmClient> NameStr for Audited<C> {
    fn name_str(&self) -> &str {
        bankrun_core::llmgate::LlmClient::name(self)
    }
}

pub fn load_client_config(p: &Path) -> Result<ClientConfig> {
    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
    let mut c: ClientConfig = toml::from_str(&text).map_err(|e| Error::ConfigInvalid(format!("{}: {e}", p.display())))?;
    if let Some(f) = c.fixtures.as_mut() {
        if f.is_relative() {
            *f = p.parent().unwrap_or(Path::new("")).join(&*f);
        }
    }
    Ok(c)
}

/// Writes the fundamentals index onto the rows.
pub fn attach_index(rows: &mut [BankYearRow], cfg: bankrun_core::metrics::IndexConfig) {
    let idx: Vec<IndexRow<String>> = rows
        .iter()
        .map(|r| IndexRow { unit: r.bank_id.clone(), year: r.year, features: r.bank_features(), failure: r.failure })
        .collect();
    for (r, v) in rows.iter_mut().zip(fundamentals_index(&idx, cfg)) {
        r.fundamentals_index = v;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub sample: String,
    pub runs: f64,
    pub run_only: f64,
    pub run_suspension_reopening: f64,
    pub run_suspension_failure: f64,
    pub failures: f64,
    pub failure_without_run: f64,
    pub suspensions: f64,
    pub suspension_only: f64,
}

impl RateRow {
    fn new(sample: String, r: [f64; 8]) -> Self {
        RateRow {
            sample,
            runs: r[0],
            run_only: r[1],
            run_suspension_reopening: r[2],
            run_suspension_failure: r[3],
            failures: r[4],
            failure_without_run: r[5],
            suspensions: r[6],
            suspension_only: r[7],
        }
    }
}

/// Articles behind an episode's events, capped for one model call.
pub fn episode_articles(
    ep: &DistressEpisode,
    by_id: &BTreeMap<&str, &ArticleRecord>,
    policy: SelectionPolicy,
) -> Vec<ArticleRecord> {
    let ids: BTreeSet<&str> = ep.events.iter().map(|e| e.article_id.as_str()).collect();
    let arts: Vec<ArticleRecord> = ids.into_iter().filter_map(|id| by_id.get(id).map(|a| (*a).clone())).collect();
    select_articles(&arts, MAX_EPISODE_ARTICLES, policy)
}

fn place_of(ep: &DistressEpisode) -> String {
    let e = &ep.events[0];
    match (e.city_raw.trim(), e.state_raw.trim()) {
        ("", "") => String::from("unknown"),
        (c, "") => c.to_string(),
        ("", s) => s.to_string(),
        (c, s) => format!("{c}, {s}"),
    }
}

/// What the model said about one episode.
#[derive(Default)]
pub struct EpisodeCalls {
    pub hint: Option<EpisodeType>,
    pub narrative: Option<String>,
    pub events: Option<Vec<ArticleEvent>>,
    pub responses: Option<bankrun_core::llmgate::ResponseFlags>,
    pub nonfundamental: Option<TriState>,
    pub disagreement: bool,
    pub errors: Vec<(&'static str, LlmError)>,
}

impl EpisodeCalls {
    /// Reclassified events replace the extracted ones when there are any.
    pub fn apply(&self, ep: &mut DistressEpisode) {
        if let Some(evs) = &self.events {
            if !evs.is_empty() {
                ep.events = evs.clone();
                ep.start_date = evs.iter().map(|e| e.event_date).min().unwrap();
                ep.end_date = evs.iter().map(|e| e.event_date).max().unwrap();
            }
        }
        if let Some(n) = self.narrative.as_ref().filter(|n| !n.is_empty()) {
            ep.narrative = Some(n.clone());
        }
        if let Some(f) = self.responses {
            ep.response_flags = f;
        }
        if let Some(n) = self.nonfundamental {
            ep.nonfundamental = n;
        }
        ep.refresh_flags();
        if self.disagreement {
            ep.flag_review("independent models disagree");
        }
        for (stage, e) in &self.errors {
            ep.flag_review(&format!("{stage} call failed: {e}"));
        }
    }
}

/// Episode, response and non-fundamental calls for one episode. The later
/// calls see the reclassified events.
pub fn run_episode_calls(
    gate: &LlmGate<'_>,
    second: Option<&LlmGate<'_>>,
    ep: &DistressEpisode,
    articles: &[ArticleRecord],
) -> EpisodeCalls {
    let mut out = EpisodeCalls::default();
    if articles.is_empty() || ep.events.is_empty() {
        return out;
    }
    let place = place_of(ep);
    let bank_name = ep.events[0].bank_name_raw.clone();
    let mut events = ep.events.clone();
    let mut primary = None;
    fn input<'a>(ep: &'a DistressEpisode, name: &'a str, place: &'a str, articles: &'a [ArticleRecord], events: &'a [ArticleEvent]) -> EpisodeInput<'a> {
        EpisodeInput { episode_id: &ep.episode_id, bank_id: &ep.bank_id, bank_name: name, place, articles, events }
    }
    match gate.analyze_episode(&input(ep, &bank_name, &place, articles, &events)) {
        Ok(a) => {
            out.hint = Some(a.episode_type_hint);
            out.narrative = Some(a.episode_narrative.clone());
            if !a.reclassified_events.is_empty() {
                events = a.reclassified_events.clone();
            }
            out.events = Some(a.reclassified_events.clone());
            primary = Some(a);
        }
        Err(e) => out.errors.push(("episode", e)),
    }
    let has_run = events.iter().any(|e| e.event_type == EventType::Run);
    if has_run {
        match gate.classify_responses(&input(ep, &bank_name, &place, articles, &events)) {
            Ok(f) => out.responses = Some(f),
            Err(e) => out.errors.push(("responses", e)),
        }
        match gate.classify_nonfundamental(&input(ep, &bank_name, &place, articles, &events)) {
            Ok(n) => out.nonfundamental = Some(n),
            Err(e) => out.errors.push(("nonfundamental", e)),
        }
    }
    if let (Some(g2), Some(mut p)) = (second, primary) {
        p.nonfundamental = out.nonfundamental.unwrap_or_default();
        match g2.analyze_episode(&input(ep, &bank_name, &place, articles, &ep.events)) {
            Ok(mut s) => {
                if has_run {
                    match g2.classify_nonfundamental(&input(ep, &bank_name, &place, articles, &events)) {
                        Ok(n) => s.nonfundamental = n,
                        Err(e) => out.errors.push(("secondary nonfundamental", e)),
                    }
                }
                out.disagreement = cross_check(&p, &s);
            }
            Err(e) => out.errors.push(("secondary episode", e)),
        }
    }
    out
}

/// The charter filter every tabulation uses.
pub fn charter_label(c: Option<CharterType>) -> &'static str {
    c.map(CharterType::as_str).unwrap_or("all")
}
