//! Bank-year analysis panel, city-year aggregates and local shock measures.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::entities::gazetteer::city_key;
use crate::entities::CharterType;
use crate::episodes::DistressEpisode;
use crate::llmgate::TriState;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PanelError {
    #[error("both amounts are zero")]
    BothZero,
    #[error("negative amount {0}")]
    NegativeAmount(f64),
    #[error("non-finite amount")]
    NonFinite,
    #[error("denominator must be positive, got {0}")]
    ZeroDenominator(f64),
    #[error("rate {0} outside [0, 1]")]
    RateOutOfRange(f64),
}

/// One call report. Amounts are in dollars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceSheet {
    pub bank_id: String,
    pub report_date: NaiveDate,
    pub state_fips: u8,
    pub city: String,
    #[serde(default = "national")]
    pub charter: CharterType,
    pub assets: f64,
    pub deposits: f64,
    pub loans: f64,
    #[serde(default)]
    pub cash: f64,
    #[serde(default)]
    pub due_from_banks: f64,
    #[serde(default)]
    pub gov_securities: f64,
    #[serde(default)]
    pub capital: f64,
    #[serde(default)]
    pub surplus: f64,
    #[serde(default)]
    pub undivided_profits: f64,
    #[serde(default)]
    pub oreo: f64,
}

fn national() -> CharterType {
    CharterType::National
}

/// Which line items count as liquid assets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiquidDefinition {
    pub cash: bool,
    pub due_from_banks: bool,
    pub gov_securities: bool,
}

impl Default for LiquidDefinition {
    fn default() -> Self {
        LiquidDefinition { cash: true, due_from_banks: true, gov_securities: true }
    }
}

impl LiquidDefinition {
    pub fn amount(&self, b: &BalanceSheet) -> f64 {
        let mut v = 0.0;
        if self.cash {
            v += b.cash;
        }
        if self.due_from_banks {
            v += b.due_from_banks;
        }
        if self.gov_securities {
            v += b.gov_securities;
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PanelConfig {
    pub liquid: LiquidDefinition,
}

/// Calendar year a call report stands for: the latest report dated on or
/// before October 1 of year t represents t.
pub fn report_year(d: NaiveDate) -> i32 {
    if (d.month(), d.day()) <= (10, 1) {
        d.year()
    } else {
        d.year() + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct BankYearRow {
    pub bank_id: String,
    pub year: i32,
    /// `SS:city key`, unique across states.
    pub city_key: String,
    pub state_fips: Option<u8>,
    pub charter_type: CharterType,
    pub run: bool,
    pub run_no_failure: bool,
    pub run_with_failure: bool,
    pub failure: bool,
    /// The failure recorded in this row belongs to an episode that had a run.
    pub failure_with_run: bool,
    pub suspension: bool,
    pub nonfundamental_run: bool,
    pub surplus_to_equity: Option<f64>,
    pub noncore_funding: Option<f64>,
    pub liquid_assets_ratio: Option<f64>,
    pub deposits_to_assets: Option<f64>,
    pub asset_growth_3y: Option<f64>,
    pub assets: Option<f64>,
    pub deposits: Option<f64>,
    pub loans: Option<f64>,
    pub liquid: Option<f64>,
    pub oreo: Option<f64>,
    pub fundamentals_index: Option<f64>,
    pub run_on_other_bank_in_city: bool,
    pub local_business_failure_rate: Option<f64>,
    pub business_failure_rate: Option<f64>,
    pub nb_failure_rate: Option<f64>,
    pub nb_run_rate: Option<f64>,
    pub real_gdp_growth: Option<f64>,
    pub stock_market_return: Option<f64>,
}

pub const BANK_FEATURES: [&str; 6] = [
    "surplus_to_equity",
    "noncore_funding",
    "surplus_to_equity_x_noncore",
    "liquid_assets_ratio",
    "deposits_to_assets",
    "asset_growth_3y",
];

impl BankYearRow {
    /// Balance-sheet regressors in `BANK_FEATURES` order, when all exist.
    pub fn bank_features(&self) -> Option<Vec<f64>> {
        let se = self.surplus_to_equity?;
        let nc = self.noncore_funding?;
        Some(vec![se, nc, se * nc, self.liquid_assets_ratio?, self.deposits_to_assets?, self.asset_growth_3y?])
    }

    /// A run in this row whose episode did not end in failure and no failure
    /// in the same row.
    pub fn event_kind(&self) -> EventKind {
        if self.failure && self.failure_with_run {
            EventKind::FailureWithRun
        } else if self.failure {
            EventKind::FailureWithoutRun
        } else if self.run_no_failure {
            EventKind::RunWithoutFailure
        } else {
            EventKind::NoEvent
        }
    }
}

/// The four mutually exclusive bank-year event categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    RunWithoutFailure,
    FailureWithRun,
    FailureWithoutRun,
    NoEvent,
}

impl EventKind {
    pub const ALL: [EventKind; 4] =
        [EventKind::RunWithoutFailure, EventKind::FailureWithRun, EventKind::FailureWithoutRun, EventKind::NoEvent];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::RunWithoutFailure => "run_without_failure",
            EventKind::FailureWithRun => "failure_with_run",
            EventKind::FailureWithoutRun => "failure_without_run",
            EventKind::NoEvent => "no_event",
        }
    }

    pub fn is_failure(self) -> bool {
        matches!(self, EventKind::FailureWithRun | EventKind::FailureWithoutRun)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PanelReport {
    /// (bank, year) rows emitted for an event year without a call report.
    pub missing_balance_sheet: Vec<(String, i32)>,
    /// Episodes of banks with no call reports at all; not in the panel.
    pub unmatched_episodes: Vec<String>,
}

#[derive(Default, Clone, Copy)]
struct Flags {
    run: bool,
    run_with_failure: bool,
    failure: bool,
    failure_with_run: bool,
    suspension: bool,
    nonfundamental: bool,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    if den > 0.0 {
        finite(num / den)
    } else {
        None
    }
}

fn place_key(state_fips: u8, city: &str) -> String {
    format!("{:02}:{}", state_fips, city_key(city))
}

/// Builds one row per bank and year that has a call report or a distress
/// indicator. Runs are dated by the first run event of an episode, failures
/// by the receivership (or first failure event), suspensions by the first
/// suspension or failure.
pub fn build_panel(sheets: &[BalanceSheet], episodes: &[DistressEpisode], cfg: &PanelConfig) -> (Vec<BankYearRow>, PanelReport) {
    let mut by_bank: BTreeMap<&str, BTreeMap<i32, &BalanceSheet>> = BTreeMap::new();
    for s in sheets {
        let e = by_bank.entry(s.bank_id.as_str()).or_default().entry(report_year(s.report_date)).or_insert(s);
        if s.report_date > e.report_date {
            *e = s;
        }
    }

    let mut report = PanelReport::default();
    let mut flags: BTreeMap<(&str, i32), Flags> = BTreeMap::new();
    for ep in episodes {
        if !by_bank.contains_key(ep.bank_id.as_str()) {
            report.unmatched_episodes.push(ep.episode_id.clone());
            continue;
        }
        let bank = ep.bank_id.as_str();
        if ep.has_run {
            let d = ep.first_run_date().unwrap_or(ep.start_date);
            let f = flags.entry((bank, d.year())).or_default();
            f.run = true;
            f.run_with_failure |= ep.has_failure;
            f.nonfundamental |= ep.nonfundamental == TriState::Yes;
        }
        if let Some(d) = ep.failure_date() {
            let f = flags.entry((bank, d.year())).or_default();
            f.failure = true;
            f.failure_with_run |= ep.has_run;
        }
        if ep.has_suspension {
            let d = ep
                .first_date_of(|t| t.is_suspension() || t.is_failure())
                .or_else(|| ep.failure_date())
                .unwrap_or(ep.start_date);
            flags.entry((bank, d.year())).or_default().suspension = true;
        }
    }

    let mut rows = Vec::new();
    for (&bank, years) in &by_bank {
        let mut all: Vec<i32> = years.keys().copied().collect();
        all.extend(flags.range((bank, i32::MIN)..=(bank, i32::MAX)).map(|((_, y), _)| *y));
        all.sort_unstable();
        all.dedup();
        for year in all {
            let f = flags.get(&(bank, year)).copied().unwrap_or_default();
            let sheet = years.get(&year).copied();
            // place from this year's report, else the nearest earlier, else later
            let place = sheet
                .or_else(|| years.range(..year).next_back().map(|(_, s)| *s))
                .or_else(|| years.range(year..).next().map(|(_, s)| *s))
                .unwrap();
            let mut row = BankYearRow {
                bank_id: String::from(bank),
                year,
                city_key: place_key(place.state_fips, &place.city),
                state_fips: Some(place.state_fips),
                charter_type: place.charter,
                run: f.run,
                run_with_failure: f.run && f.run_with_failure,
                run_no_failure: f.run && !f.run_with_failure,
                failure: f.failure,
                failure_with_run: f.failure && f.failure_with_run,
                suspension: f.suspension,
                nonfundamental_run: f.run && f.nonfundamental,
                ..Default::default()
            };
            match sheet {
                Some(s) => {
                    let equity = s.capital + s.surplus + s.undivided_profits;
                    let liquid = cfg.liquid.amount(s);
                    row.assets = finite(s.assets);
                    row.deposits = finite(s.deposits);
                    row.loans = finite(s.loans);
                    row.liquid = finite(liquid);
                    row.oreo = finite(s.oreo);
                    row.surplus_to_equity = ratio(s.surplus, equity);
                    row.noncore_funding = ratio(s.assets - s.deposits - equity, s.assets);
                    row.liquid_assets_ratio = ratio(liquid, s.assets);
                    row.deposits_to_assets = ratio(s.deposits, s.assets);
                    let prior: Option<Vec<&BalanceSheet>> = (1..=3).map(|l| years.get(&(year - l)).copied()).collect();
                    row.asset_growth_3y = prior.and_then(|p| ratio(s.assets, p[2].assets)).map(|g| g - 1.0);
                }
                None => report.missing_balance_sheet.push((String::from(bank), year)),
            }
            rows.push(row);
        }
    }
    (rows, report)
}

/// `(to − from) / (0.5·(to + from))`, bounded in [−2, 2].
pub fn symmetric_growth(from: f64, to: f64) -> Result<f64, PanelError> {
    if !from.is_finite() || !to.is_finite() {
        return Err(PanelError::NonFinite);
    }
    if from < 0.0 {
        return Err(PanelError::NegativeAmount(from));
    }
    if to < 0.0 {
        return Err(PanelError::NegativeAmount(to));
    }
    if from == 0.0 && to == 0.0 {
        return Err(PanelError::BothZero);
    }
    Ok((to - from) / (0.5 * (to + from)))
}

/// How tercile run shares are mapped onto [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rescale {
    /// Divide by the city's asset share in the tercile.
    #[default]
    TercileWeight,
    /// Divide by the largest raw value over all city-years.
    DivideByMax,
}

pub const TERCILE_WEAK: usize = 0;
pub const TERCILE_INTERMEDIATE: usize = 1;
pub const TERCILE_STRONG: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CityYearRow {
    pub city_key: String,
    pub year: i32,
    pub n_banks: usize,
    pub total_assets: f64,
    pub total_loans: f64,
    pub total_deposits: f64,
    pub run_strong: f64,
    pub run_intermediate: f64,
    pub run_weak: f64,
    pub run_wo_fail: f64,
    pub fail_wo_run: f64,
    pub fail_w_run: f64,
}

impl CityYearRow {
    pub fn shocks(&self) -> [f64; 6] {
        [self.run_strong, self.run_intermediate, self.run_weak, self.run_wo_fail, self.fail_wo_run, self.fail_w_run]
    }
}

/// Aggregates bank rows to city-years. `terciles[i]` is the tercile of row
/// i's fundamentals at t−1 (0 weak, 2 strong). Banks are weighted by assets
/// at t, or at t−1 when the year's report is missing; banks with neither are
/// left out.
pub fn city_shocks(rows: &[BankYearRow], terciles: &[Option<usize>], rescale: Rescale) -> Vec<CityYearRow> {
    let at: BTreeMap<(&str, i32), usize> = rows.iter().enumerate().map(|(i, r)| ((r.bank_id.as_str(), r.year), i)).collect();
    let mut groups: BTreeMap<(&str, i32), Vec<(usize, f64)>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        let w = r.assets.or_else(|| at.get(&(r.bank_id.as_str(), r.year - 1)).and_then(|&j| rows[j].assets));
        if let Some(w) = w.filter(|w| *w > 0.0) {
            groups.entry((r.city_key.as_str(), r.year)).or_default().push((i, w));
        }
    }
    let mut out = Vec::with_capacity(groups.len());
    for ((city, year), members) in groups {
        let total: f64 = members.iter().map(|m| m.1).sum();
        let mut c = CityYearRow { city_key: String::from(city), year, n_banks: members.len(), total_assets: total, ..Default::default() };
        let mut share = [0.0; 3];
        let mut raw = [0.0; 3];
        for &(i, a) in &members {
            let r = &rows[i];
            let w = a / total;
            c.total_loans += r.loans.unwrap_or(0.0);
            c.total_deposits += r.deposits.unwrap_or(0.0);
            if let Some(j) = terciles.get(i).copied().flatten().filter(|j| *j < 3) {
                share[j] += w;
                if r.run {
                    raw[j] += w;
                }
            }
            if r.run_no_failure {
                c.run_wo_fail += w;
            }
            if r.failure && r.failure_with_run {
                c.fail_w_run += w;
            } else if r.failure {
                c.fail_wo_run += w;
            }
        }
        let scaled: [f64; 3] = core::array::from_fn(|j| match rescale {
            Rescale::TercileWeight if share[j] > 0.0 => (raw[j] / share[j]).min(1.0),
            Rescale::TercileWeight => 0.0,
            Rescale::DivideByMax => raw[j],
        });
        c.run_weak = scaled[TERCILE_WEAK];
        c.run_intermediate = scaled[TERCILE_INTERMEDIATE];
        c.run_strong = scaled[TERCILE_STRONG];
        c.run_wo_fail = c.run_wo_fail.min(1.0);
        c.fail_w_run = c.fail_w_run.min(1.0);
        c.fail_wo_run = c.fail_wo_run.min(1.0);
        out.push(c);
    }
    if rescale == Rescale::DivideByMax {
        let max = |f: fn(&CityYearRow) -> f64| out.iter().map(f).fold(0.0f64, f64::max);
        let (ms, mi, mw) = (max(|c| c.run_strong), max(|c| c.run_intermediate), max(|c| c.run_weak));
        for c in out.iter_mut() {
            c.run_strong = if ms > 0.0 { c.run_strong / ms } else { 0.0 };
            c.run_intermediate = if mi > 0.0 { c.run_intermediate / mi } else { 0.0 };
            c.run_weak = if mw > 0.0 { c.run_weak / mw } else { 0.0 };
        }
    }
    out
}

/// Annual aggregate series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CovariateRow {
    pub year: i32,
    pub stock_market_return: Option<f64>,
    pub real_gdp_growth: Option<f64>,
    pub nb_failure_rate: Option<f64>,
    pub nb_run_rate: Option<f64>,
    pub business_failure_rate: Option<f64>,
}

/// State business failures and the manufacturing establishments they are
/// measured against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateBusinessRow {
    pub state_fips: u8,
    pub year: i32,
    pub failures: f64,
    pub establishments: f64,
}

pub fn business_failure_rate(failures: f64, establishments: f64) -> Result<f64, PanelError> {
    if !(establishments > 0.0) {
        return Err(PanelError::ZeroDenominator(establishments));
    }
    if !(failures >= 0.0) {
        return Err(PanelError::NegativeAmount(failures));
    }
    let r = failures / establishments;
    if r > 1.0 {
        return Err(PanelError::RateOutOfRange(r));
    }
    Ok(r)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CovariateReport {
    /// Panel years without an aggregate series row.
    pub missing_series: Vec<i32>,
    /// State-years without a usable business failure rate.
    pub missing_state: Vec<(u8, i32)>,
    pub rejected_rates: Vec<(u8, i32, String)>,
}

/// Joins the aggregate and state series onto the panel by year and state,
/// and flags rows where another bank in the same city had a run that year.
pub fn attach_covariates(rows: &mut [BankYearRow], macros: &[CovariateRow], states: &[StateBusinessRow]) -> CovariateReport {
    let mut report = CovariateReport::default();
    let by_year: BTreeMap<i32, &CovariateRow> = macros.iter().map(|c| (c.year, c)).collect();
    let mut state_rate: BTreeMap<(u8, i32), f64> = BTreeMap::new();
    for s in states {
        match business_failure_rate(s.failures, s.establishments) {
            Ok(r) => {
                state_rate.insert((s.state_fips, s.year), r);
            }
            Err(e) => report.rejected_rates.push((s.state_fips, s.year, format!("{e}"))),
        }
    }
    let mut runs: BTreeMap<(String, i32), usize> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.run) {
        *runs.entry((r.city_key.clone(), r.year)).or_default() += 1;
    }
    for r in rows.iter_mut() {
        let n = runs.get(&(r.city_key.clone(), r.year)).copied().unwrap_or(0);
        r.run_on_other_bank_in_city = n > r.run as usize;
        match by_year.get(&r.year) {
            Some(c) => {
                r.stock_market_return = c.stock_market_return;
                r.real_gdp_growth = c.real_gdp_growth;
                r.nb_failure_rate = c.nb_failure_rate;
                r.nb_run_rate = c.nb_run_rate;
                r.business_failure_rate = c.business_failure_rate;
            }
            None => {
                if !report.missing_series.contains(&r.year) {
                    report.missing_series.push(r.year);
                }
            }
        }
        if let Some(fips) = r.state_fips {
            r.local_business_failure_rate = state_rate.get(&(fips, r.year)).copied();
            if r.local_business_failure_rate.is_none() && !report.missing_state.contains(&(fips, r.year)) {
                report.missing_state.push((fips, r.year));
            }
        }
    }
    report.missing_series.sort_unstable();
    report.missing_state.sort_unstable();
    report
}
