//! Named report presets: each turns episodes, the bank-year panel or the
//! state-quarter panel into a tidy table and a chart.

use std::collections::{BTreeMap, BTreeSet};

use bankrun_core::entities::normalize_state;
use bankrun_core::episodes::{tabulate, tabulate_by_year, standard_rows, DistressEpisode, TabulateFilter};
use bankrun_core::llmgate::ResponseFlags;
use bankrun_core::metrics::crisis::{crisis_correlation, CrisisSeries, StateMonthCount, MONTHLY_DK_BANDWIDTH};
use bankrun_core::metrics::event_study::event_study;
use bankrun_core::metrics::lp::{
    bank_panel, city_panel, cumulative_curve, local_projection, state_quarter_panel, BandwidthRule, BankShocks, CityShocks,
    LpHorizon, LpSpec, RunWindow, StateQuarterRow,
};
use bankrun_core::metrics::passthrough::{
    decile_passthrough, lagged_bins, passthrough, predictability, FeatureGroup, PassthroughOptions, Signal, Target, Variant,
};
use bankrun_core::metrics::{FitResult, MetricsError};
use bankrun_core::panel::{city_shocks, BankYearRow, CityYearRow};
use chrono::Datelike;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};

/// Input a preset is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Need {
    Episodes,
    Panel,
    StateQuarters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Preset {
    pub name: &'static str,
    pub title: &'static str,
    pub need: Need,
}

pub const PRESETS: [Preset; 17] = [
    Preset { name: "table1", title: "Distress episodes by sample", need: Need::Episodes },
    Preset { name: "table2", title: "Runs and failures around crisis dates", need: Need::Episodes },
    Preset { name: "table3", title: "Predicting runs one year ahead", need: Need::Panel },
    Preset { name: "table4", title: "In-sample AUC of prediction models", need: Need::Panel },
    Preset { name: "table5", title: "Run-to-failure passthrough by fundamentals", need: Need::Panel },
    Preset { name: "table6", title: "Passthrough of non-fundamental runs", need: Need::Panel },
    Preset { name: "table7", title: "Passthrough and adverse signals", need: Need::Panel },
    Preset { name: "fig1", title: "Runs per year, with and without failure", need: Need::Episodes },
    Preset { name: "fig4", title: "Cumulative failure probability after a run", need: Need::Episodes },
    Preset { name: "fig5", title: "Passthrough by decile of lagged fundamentals", need: Need::Panel },
    Preset { name: "fig6", title: "Bank responses during runs", need: Need::Episodes },
    Preset { name: "fig7", title: "Deposits and loans after a run without failure", need: Need::Panel },
    Preset { name: "fig8", title: "City deposits and loans after runs", need: Need::Panel },
    Preset { name: "fig9", title: "City deposits and loans after distress", need: Need::Panel },
    Preset { name: "figA1", title: "Balance sheet ratios around events", need: Need::Panel },
    Preset { name: "figA6", title: "Business failures after bank distress", need: Need::StateQuarters },
    Preset { name: "runs_by_state", title: "Run episodes by state", need: Need::Episodes },
];

pub fn lookup(name: &str) -> Result<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name).ok_or_else(|| {
        let known: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        Error::UnknownPreset(name.to_string(), known.join(", "))
    })
}

#[derive(Debug, Clone, Default)]
pub struct PresetData {
    pub episodes: Option<Vec<DistressEpisode>>,
    pub bank_counts: Option<BTreeMap<i32, u64>>,
    pub panel: Option<Vec<BankYearRow>>,
    pub state_quarters: Option<Vec<StateQuarterRow>>,
}

/// Column-oriented result: one header, rows of JSON scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub preset: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    fn new(preset: &str, columns: &[&str]) -> Self {
        Table { preset: preset.to_string(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn col(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory csv");
        for r in &self.rows {
            w.write_record(r.iter().map(cell_text)).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv output is utf-8")
    }
}

pub fn cell_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// How the chart of a preset is drawn.
#[derive(Debug, Clone, PartialEq)]
pub enum Chart {
    /// One line per y column, or per value of `series`; `se` draws a
    /// 95% band.
    Lines { x: String, ys: Vec<String>, se: Option<String>, series: Option<String>, facet: Option<String> },
    /// Bars over the categories of `x`, one panel per value of `facet`.
    Bars { x: String, y: String, se: Option<String>, facet: Option<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub table: Table,
    pub chart: Chart,
}

impl Output {
    pub fn svg(&self, preset: &Preset) -> String {
        crate::svg::render(preset.title, &self.table, &self.chart)
    }
}

fn s(v: &str) -> Value {
    Value::String(v.to_string())
}

fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

fn int(x: u64) -> Value {
    Value::from(x)
}

fn lines(x: &str, ys: &[&str], se: Option<&str>, series: Option<&str>, facet: Option<&str>) -> Chart {
    Chart::Lines {
        x: x.into(),
        ys: ys.iter().map(|y| y.to_string()).collect(),
        se: se.map(Into::into),
        series: series.map(Into::into),
        facet: facet.map(Into::into),
    }
}

fn bars(x: &str, y: &str, se: Option<&str>, facet: Option<&str>) -> Chart {
    Chart::Bars { x: x.into(), y: y.into(), se: se.map(Into::into), facet: facet.map(Into::into) }
}

const FIT_COLUMNS: [&str; 6] = ["model", "term", "estimate", "se", "n", "status"];

/// Coefficient rows of one regression; year dummies are left out.
fn push_fit(t: &mut Table, model: &str, fit: &std::result::Result<FitResult, MetricsError>) {
    match fit {
        Ok(f) => {
            for (i, term) in f.terms.iter().enumerate().filter(|(_, term)| !term.starts_with("year_")) {
                t.push(vec![s(model), s(term), num(f.coefficients[i]), num(f.dk_se[i]), int(f.n_obs as u64), s("ok")]);
            }
        }
        Err(e) => t.push(vec![s(model), Value::Null, Value::Null, Value::Null, Value::Null, s(&e.to_string())]),
    }
}

const LP_COLUMNS: [&str; 7] = ["model", "term", "h", "estimate", "se", "n", "status"];

fn push_lp(t: &mut Table, model: &str, shocks: &[String], hs: &[LpHorizon]) {
    for hz in hs {
        for shock in shocks {
            let row = match (&hz.fit, hz.irf(shock)) {
                (Ok(f), Some((b, se))) => vec![num(b), num(se), int(f.n_obs as u64), s("ok")],
                (Ok(f), None) => vec![Value::Null, Value::Null, int(f.n_obs as u64), s("shock has no variation")],
                (Err(e), _) => vec![Value::Null, Value::Null, Value::Null, s(&e.to_string())],
            };
            let mut full = vec![s(model), s(shock), Value::from(hz.h)];
            full.extend(row);
            t.push(full);
        }
    }
}

fn need<'a, T>(v: &'a Option<T>, preset: &str, what: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| Error::SchemaMismatch(preset.to_string(), format!("{what} input missing")))
}

pub fn compute(preset: &Preset, d: &PresetData, cfg: &PipelineConfig) -> Result<Output> {
    let name = preset.name;
    let bw = cfg.analysis.dk_bandwidth;
    let pt = PassthroughOptions { dk_bandwidth: bw, cut_mode: cfg.panel.cut_mode };
    match name {
        "table1" => Ok(table1(need(&d.episodes, name, "episodes")?, cfg)),
        "table2" => table2(need(&d.episodes, name, "episodes")?, cfg),
        "fig1" => Ok(fig1(need(&d.episodes, name, "episodes")?, d.bank_counts.as_ref(), cfg)),
        "fig4" => Ok(fig4(need(&d.episodes, name, "episodes")?, cfg)),
        "fig6" => Ok(fig6(need(&d.episodes, name, "episodes")?)),
        "runs_by_state" => Ok(runs_by_state(need(&d.episodes, name, "episodes")?)),
        "figA6" => Ok(fig_a6(need(&d.state_quarters, name, "state-quarter")?, bw)),
        _ => {
            let rows = need(&d.panel, name, "panel")?;
            match name {
                "table3" => Ok(table3(rows, bw)),
                "table4" => Ok(table4(rows, bw)),
                "table5" => Ok(variants(name, rows, &[Variant::Simple, Variant::Continuous, Variant::Strong, Variant::VeryStrong], pt)),
                "table6" => Ok(variants(name, rows, &[Variant::Simple, Variant::NonFundamental], pt)),
                "table7" => Ok(variants(
                    name,
                    rows,
                    &[
                        Variant::Signals(vec![Signal::RunOnOtherBankInCity]),
                        Variant::Signals(vec![Signal::LocalBusinessFailureRate]),
                        Variant::Signals(vec![Signal::BusinessFailureRate]),
                        Variant::Signals(vec![Signal::RunOnOtherBankInCity, Signal::LocalBusinessFailureRate, Signal::BusinessFailureRate]),
                    ],
                    pt,
                )),
                "fig5" => fig5(rows, pt),
                "fig7" => Ok(fig7(rows, cfg)),
                "fig8" => fig8(name, rows, cfg, CityShocks::Terciles),
                "fig9" => fig8(name, rows, cfg, CityShocks::Distress),
                "figA1" => Ok(fig_a1(rows, bw)),
                _ => unreachable!("preset list and dispatch agree"),
            }
        }
    }
}

fn table1(eps: &[DistressEpisode], cfg: &PipelineConfig) -> Output {
    let crisis = &cfg.tabulate.crisis_years;
    let mut cols = vec!["sample"];
    cols.extend(bankrun_core::episodes::Counts::HEADER);
    let mut t = Table::new("table1", &cols);
    for (label, f) in standard_rows(crisis, cfg.tabulate.charter) {
        let c = tabulate(eps, &f, crisis);
        let mut row = vec![s(&label)];
        row.extend(c.as_array().into_iter().map(int));
        t.push(row);
    }
    Output { table: t, chart: bars("sample", "runs", None, None) }
}

/// Month of the first run or failure of each episode, by state.
fn state_months(eps: &[DistressEpisode], pick: fn(&DistressEpisode) -> Option<chrono::NaiveDate>) -> Vec<StateMonthCount> {
    let mut hits: BTreeMap<(u8, i32, u32), f64> = BTreeMap::new();
    let mut states = BTreeSet::new();
    let mut years = BTreeSet::new();
    for ep in eps {
        let Some(fips) = ep.events.first().and_then(|e| normalize_state(&e.state_raw).ok()).and_then(|m| m.unique()) else {
            continue;
        };
        states.insert(fips);
        years.insert(ep.start_date.year());
        if let Some(d) = pick(ep) {
            years.insert(d.year());
            *hits.entry((fips, d.year(), d.month())).or_default() += 1.0;
        }
    }
    let (Some(&y0), Some(&y1)) = (years.first(), years.last()) else { return Vec::new() };
    let mut out = Vec::new();
    for &st in &states {
        for y in y0..=y1 {
            for m in 1..=12 {
                out.push(StateMonthCount { state_fips: st, year: y, month: m, count: hits.get(&(st, y, m)).copied().unwrap_or(0.0) });
            }
        }
    }
    out
}

fn table2(eps: &[DistressEpisode], cfg: &PipelineConfig) -> Result<Output> {
    let a = &cfg.analysis;
    let (Some(pm), Some(rp)) = (&a.panic_months, &a.regional_panics) else {
        return Err(Error::ConfigInvalid(String::from(
            "table2 needs analysis.panic_months and analysis.regional_panics",
        )));
    };
    let series = CrisisSeries {
        crisis_years: Some(cfg.tabulate.crisis_years.clone()),
        panic_months: Some(pm.iter().copied().collect()),
        regional_panics: Some(rp.iter().copied().collect()),
    };
    let mut t = Table::new("table2", &FIT_COLUMNS);
    let outcomes: [(&str, fn(&DistressEpisode) -> Option<chrono::NaiveDate>); 2] =
        [("runs", DistressEpisode::first_run_date), ("failures", DistressEpisode::failure_date)];
    for (model, pick) in outcomes {
        let counts = state_months(eps, pick);
        push_fit(&mut t, model, &crisis_correlation(&counts, &series, MONTHLY_DK_BANDWIDTH));
    }
    Ok(Output { table: t, chart: bars("term", "estimate", Some("se"), Some("model")) })
}

const GROUP_SETS: [(&str, &[FeatureGroup]); 3] = [
    ("bank", &[FeatureGroup::Bank]),
    ("bank+macro", &[FeatureGroup::Bank, FeatureGroup::Macro]),
    ("bank+macro+local", &[FeatureGroup::Bank, FeatureGroup::Macro, FeatureGroup::Local]),
];

const TARGETS: [(&str, Target); 4] = [
    ("run", Target::Run),
    ("run_without_failure", Target::RunWithoutFailure),
    ("run_with_failure", Target::RunWithFailure),
    ("failure", Target::Failure),
];

fn table3(rows: &[BankYearRow], bw: usize) -> Output {
    let mut t = Table::new("table3", &FIT_COLUMNS);
    for (g, groups) in GROUP_SETS {
        push_fit(&mut t, &format!("run|{g}"), &predictability(rows, groups, Target::Run, bw));
    }
    Output { table: t, chart: bars("term", "estimate", Some("se"), Some("model")) }
}

fn table4(rows: &[BankYearRow], bw: usize) -> Output {
    let mut t = Table::new("table4", &FIT_COLUMNS);
    for (tn, target) in TARGETS {
        for (g, groups) in GROUP_SETS {
            let model = format!("{tn}|{g}");
            match predictability(rows, groups, target, bw) {
                Ok(f) => t.push(vec![s(&model), s("auc"), f.auc.map(num).unwrap_or(Value::Null), Value::Null, int(f.n_obs as u64), s("ok")]),
                Err(e) => t.push(vec![s(&model), s("auc"), Value::Null, Value::Null, Value::Null, s(&e.to_string())]),
            }
        }
    }
    Output { table: t, chart: bars("model", "estimate", None, None) }
}

fn variant_name(v: &Variant) -> String {
    match v {
        Variant::Simple => "simple".into(),
        Variant::Continuous => "continuous".into(),
        Variant::Strong => "strong".into(),
        Variant::VeryStrong => "very_strong".into(),
        Variant::NonFundamental => "nonfundamental".into(),
        Variant::Signals(sig) => sig.iter().map(|s| s.name()).collect::<Vec<_>>().join("+"),
    }
}

fn variants(name: &str, rows: &[BankYearRow], vs: &[Variant], opts: PassthroughOptions) -> Output {
    let mut t = Table::new(name, &FIT_COLUMNS);
    for v in vs {
        push_fit(&mut t, &variant_name(v), &passthrough(rows, v, opts));
    }
    Output { table: t, chart: bars("term", "estimate", Some("se"), Some("model")) }
}

fn fig1(eps: &[DistressEpisode], banks: Option<&BTreeMap<i32, u64>>, cfg: &PipelineConfig) -> Output {
    let crisis = &cfg.tabulate.crisis_years;
    let filter = TabulateFilter { charter: cfg.tabulate.charter, ..Default::default() };
    let by_year = tabulate_by_year(eps, &filter, crisis);
    let mut cols = vec!["year", "runs", "runs_with_failure", "runs_without_failure", "failures", "failure_without_run"];
    if banks.is_some() {
        cols.extend(["banks", "run_rate_with_failure", "run_rate_without_failure"]);
    }
    let mut t = Table::new("fig1", &cols);
    let years: BTreeSet<i32> = by_year.keys().copied().chain(banks.into_iter().flat_map(|b| b.keys().copied())).collect();
    for y in years {
        let c = by_year.get(&y).copied().unwrap_or_default();
        let with = c.run_suspension_failure;
        let without = c.run_only + c.run_suspension_reopening;
        let mut row = vec![Value::from(y), int(c.runs), int(with), int(without), int(c.failures), int(c.failure_without_run)];
        if let Some(b) = banks {
            match b.get(&y).copied().filter(|n| *n > 0) {
                Some(n) => row.extend([int(n), num(100.0 * with as f64 / n as f64), num(100.0 * without as f64 / n as f64)]),
                None => row.extend([Value::Null, Value::Null, Value::Null]),
            }
        }
        t.push(row);
    }
    let chart = if banks.is_some() {
        lines("year", &["run_rate_with_failure", "run_rate_without_failure"], None, None, None)
    } else {
        lines("year", &["runs_with_failure", "runs_without_failure"], None, None, None)
    };
    Output { table: t, chart }
}

/// Run-anchored windows: days from the first run to the failure, if any.
pub fn run_windows(eps: &[DistressEpisode]) -> Vec<RunWindow> {
    eps.iter()
        .filter_map(|ep| {
            let run = ep.first_run_date()?;
            Some(RunWindow { year: run.year(), event_offset: ep.failure_date().map(|f| (f - run).num_days()) })
        })
        .collect()
}

fn fig4(eps: &[DistressEpisode], cfg: &PipelineConfig) -> Output {
    let windows = run_windows(eps);
    let mut t = Table::new("fig4", &LP_COLUMNS);
    let hs = cumulative_curve(&windows, (0, cfg.analysis.daily_horizon), cfg.analysis.dk_bandwidth);
    push_lp(&mut t, "failure_after_run", &[String::from("run")], &hs);
    Output { table: t, chart: lines("h", &["estimate"], Some("se"), None, None) }
}

fn fig5(rows: &[BankYearRow], opts: PassthroughOptions) -> Result<Output> {
    let mut t = Table::new("fig5", &["model", "term", "decile", "estimate", "se", "n", "status"]);
    for (i, fit) in decile_passthrough(rows, opts)?.iter().enumerate() {
        let d = Value::from(i + 1);
        match fit {
            Ok(f) => {
                let j = f.index("run").expect("decile fits keep the run term");
                t.push(vec![s("decile"), s("run"), d, num(f.coefficients[j]), num(f.dk_se[j]), int(f.n_obs as u64), s("ok")]);
            }
            Err(e) => t.push(vec![s("decile"), s("run"), d, Value::Null, Value::Null, Value::Null, s(&e.to_string())]),
        }
    }
    Ok(Output { table: t, chart: bars("decile", "estimate", Some("se"), None) })
}

fn fig6(eps: &[DistressEpisode]) -> Output {
    let runs: Vec<&DistressEpisode> = eps.iter().filter(|e| e.has_run).collect();
    let mut hits = [0u64; 8];
    for ep in &runs {
        for (h, on) in hits.iter_mut().zip(ep.response_flags.as_array()) {
            *h += on as u64;
        }
    }
    let mut t = Table::new("fig6", &["response", "share", "count", "n_runs"]);
    for (name, h) in ResponseFlags::FIELDS.iter().zip(hits) {
        let share = if runs.is_empty() { 0.0 } else { h as f64 / runs.len() as f64 };
        t.push(vec![s(name), num(share), int(h), int(runs.len() as u64)]);
    }
    Output { table: t, chart: bars("response", "share", None, None) }
}

fn runs_by_state(eps: &[DistressEpisode]) -> Output {
    let mut by: BTreeMap<String, [u64; 2]> = BTreeMap::new();
    for ep in eps {
        let st = ep
            .events
            .first()
            .and_then(|e| normalize_state(&e.state_raw).ok())
            .and_then(|m| m.unique())
            .and_then(bankrun_core::entities::state_code)
            .unwrap_or("unknown");
        let c = by.entry(st.to_string()).or_default();
        c[0] += ep.has_run as u64;
        c[1] += ep.has_failure as u64;
    }
    let mut t = Table::new("runs_by_state", &["state", "runs", "failures"]);
    for (st, c) in by {
        t.push(vec![s(&st), int(c[0]), int(c[1])]);
    }
    Output { table: t, chart: bars("state", "runs", None, None) }
}

fn shock_names(p: &bankrun_core::metrics::lp::LpPanel) -> Vec<String> {
    p.shocks.iter().map(|(n, _)| n.clone()).collect()
}

fn fig7(rows: &[BankYearRow], cfg: &PipelineConfig) -> Output {
    let mut t = Table::new("fig7", &LP_COLUMNS);
    let mut spec = LpSpec::bank();
    spec.bandwidth = BandwidthRule::Fixed(cfg.analysis.dk_bandwidth);
    let outcomes: [(&str, fn(&BankYearRow) -> Option<f64>); 2] = [("deposits", |r| r.deposits), ("loans", |r| r.loans)];
    for (name, f) in outcomes {
        for shocks in [BankShocks::RunWithoutFailure, BankShocks::StrongWeak] {
            match bank_panel(rows, f, shocks, cfg.panel.cut_mode) {
                Ok(p) => push_lp(&mut t, name, &shock_names(&p), &local_projection(&p, &spec)),
                Err(e) => t.push(vec![s(name), Value::Null, Value::Null, Value::Null, Value::Null, Value::Null, s(&e.to_string())]),
            }
        }
    }
    Output { table: t, chart: lines("h", &["estimate"], Some("se"), Some("term"), Some("model")) }
}

fn fig8(name: &str, rows: &[BankYearRow], cfg: &PipelineConfig, shocks: CityShocks) -> Result<Output> {
    let terciles = lagged_bins(rows, 3, cfg.panel.cut_mode)?;
    let cities = city_shocks(rows, &terciles, cfg.panel.rescale);
    let spec = LpSpec::city(cfg.analysis.city_max_horizon);
    let mut t = Table::new(name, &LP_COLUMNS);
    let outcomes: [(&str, fn(&CityYearRow) -> f64); 2] = [("deposits", |c| c.total_deposits), ("loans", |c| c.total_loans)];
    for (model, f) in outcomes {
        let p = city_panel(&cities, f, shocks);
        push_lp(&mut t, model, &shock_names(&p), &local_projection(&p, &spec));
    }
    Ok(Output { table: t, chart: lines("h", &["estimate"], Some("se"), Some("term"), Some("model")) })
}

fn fig_a1(rows: &[BankYearRow], bw: usize) -> Output {
    let mut t = Table::new("figA1", &LP_COLUMNS);
    let outcomes: [(&str, fn(&BankYearRow) -> Option<f64>); 3] = [
        ("deposits_to_assets", |r| r.deposits_to_assets),
        ("liquid_assets_ratio", |r| r.liquid_assets_ratio),
        ("surplus_to_equity", |r| r.surplus_to_equity),
    ];
    for (model, f) in outcomes {
        match event_study(rows, f, (-5, 5), bw) {
            Ok(hs) => {
                for hz in hs {
                    for k in &hz.estimates {
                        let tail = match &k.value {
                            Ok(Some((b, se))) => vec![num(*b), num(*se), int(hz.n_obs as u64), s("ok")],
                            Ok(None) => continue,
                            Err(e) => vec![Value::Null, Value::Null, int(hz.n_obs as u64), s(&e.to_string())],
                        };
                        let mut row = vec![s(model), s(k.kind.as_str()), Value::from(hz.h)];
                        row.extend(tail);
                        t.push(row);
                    }
                }
            }
            Err(e) => t.push(vec![s(model), Value::Null, Value::Null, Value::Null, Value::Null, Value::Null, s(&e.to_string())]),
        }
    }
    Output { table: t, chart: lines("h", &["estimate"], Some("se"), Some("term"), Some("model")) }
}

fn fig_a6(rows: &[StateQuarterRow], bw: usize) -> Output {
    let p = state_quarter_panel(rows);
    let mut spec = LpSpec::business_failures();
    if bw != 3 {
        spec.bandwidth = BandwidthRule::Fixed(bw * 4);
    }
    let mut t = Table::new("figA6", &LP_COLUMNS);
    push_lp(&mut t, "business_failure_rate", &shock_names(&p), &local_projection(&p, &spec));
    Output { table: t, chart: lines("h", &["estimate"], Some("se"), None, None) }
}
