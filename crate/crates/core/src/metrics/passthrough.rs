//! Linear probability models of failure on runs, and of runs on lagged
//! conditions.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::auc::auc;
use super::ols::{fit_ols_dk, linear_predictions, Design, FitOptions, FitResult};
use super::quantile::{bins, CutMode};
use super::MetricsError;
use crate::panel::{BankYearRow, BANK_FEATURES};

fn b(v: bool) -> f64 {
    if v {
        1.0
    } else {
        0.0
    }
}

/// `F_{b,t−1}` for every row, looked up from the bank's previous-year row.
pub fn lagged_fundamentals(rows: &[BankYearRow]) -> Vec<Option<f64>> {
    let at: BTreeMap<(&str, i32), usize> = rows.iter().enumerate().map(|(i, r)| ((r.bank_id.as_str(), r.year), i)).collect();
    rows.iter()
        .map(|r| at.get(&(r.bank_id.as_str(), r.year - 1)).and_then(|&j| rows[j].fundamentals_index))
        .collect()
}

/// Bin (0 = weakest) of `F_{b,t−1}` among `k` quantile bins.
pub fn lagged_bins(rows: &[BankYearRow], k: usize, mode: CutMode) -> Result<Vec<Option<usize>>, MetricsError> {
    let idx: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].fundamentals_index.is_some()).collect();
    let items: Vec<(i32, f64, &str)> =
        idx.iter().map(|&i| (rows[i].year, rows[i].fundamentals_index.unwrap(), rows[i].bank_id.as_str())).collect();
    let own = bins(&items, k, mode)?;
    let mut at: BTreeMap<(&str, i32), usize> = BTreeMap::new();
    for (n, &i) in idx.iter().enumerate() {
        if let Some(bin) = own[n] {
            at.insert((rows[i].bank_id.as_str(), rows[i].year), bin);
        }
    }
    Ok(rows.iter().map(|r| at.get(&(r.bank_id.as_str(), r.year - 1)).copied()).collect())
}

/// Non-bank-specific signals for the adverse-signal interactions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signal {
    RunOnOtherBankInCity,
    LocalBusinessFailureRate,
    BusinessFailureRate,
}

impl Signal {
    pub fn name(self) -> &'static str {
        match self {
            Signal::RunOnOtherBankInCity => "run_on_other_bank_in_city",
            Signal::LocalBusinessFailureRate => "local_business_failure_rate",
            Signal::BusinessFailureRate => "business_failure_rate",
        }
    }

    fn value(self, r: &BankYearRow) -> Option<f64> {
        match self {
            Signal::RunOnOtherBankInCity => Some(b(r.run_on_other_bank_in_city)),
            Signal::LocalBusinessFailureRate => r.local_business_failure_rate,
            Signal::BusinessFailureRate => r.business_failure_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Failure on run alone.
    Simple,
    /// Run, lagged fundamentals and their product.
    Continuous,
    /// Upper tercile of lagged fundamentals.
    Strong,
    /// Top decile of lagged fundamentals.
    VeryStrong,
    /// Non-fundamental runs against all other runs.
    NonFundamental,
    Signals(Vec<Signal>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassthroughOptions {
    pub dk_bandwidth: usize,
    pub cut_mode: CutMode,
}

impl Default for PassthroughOptions {
    fn default() -> Self {
        PassthroughOptions { dk_bandwidth: 3, cut_mode: CutMode::Expanding }
    }
}

/// Failure on a run dummy, a moderator and their product, for data that
/// does not come from a panel (simulations, external extracts).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassObs {
    pub year: i32,
    pub run: bool,
    pub failure: bool,
    pub moderator: f64,
}

pub fn interaction_fit(obs: &[PassObs], moderator: &str, dk_bandwidth: usize) -> Result<FitResult, MetricsError> {
    let y = obs.iter().map(|o| b(o.failure)).collect();
    let d = Design::new(y, obs.iter().map(|o| o.year as i64).collect())
        .column("run", obs.iter().map(|o| b(o.run)).collect())
        .column(moderator, obs.iter().map(|o| o.moderator).collect())
        .column(&format!("{moderator}_x_run"), obs.iter().map(|o| b(o.run) * o.moderator).collect());
    fit_checked(&d, dk_bandwidth, &["run"])
}

fn fit_checked(d: &Design, bw: usize, required: &[&str]) -> Result<FitResult, MetricsError> {
    let fit = fit_ols_dk(d, FitOptions::bandwidth(bw).dropping())?;
    let missing: Vec<String> = required.iter().filter(|r| fit.dropped.iter().any(|d| d == *r)).map(|r| r.to_string()).collect();
    if missing.is_empty() {
        Ok(fit)
    } else {
        Err(MetricsError::RankDeficient(missing))
    }
}

/// Failure in t on a run in t, in the requested variant. Interaction
/// columns that are identically zero are dropped and listed in
/// `FitResult::dropped`; losing the run column itself is an error.
pub fn passthrough(rows: &[BankYearRow], variant: &Variant, opts: PassthroughOptions) -> Result<FitResult, MetricsError> {
    passthrough_filtered(rows, variant, opts, &|_| true)
}

pub fn passthrough_filtered(
    rows: &[BankYearRow],
    variant: &Variant,
    opts: PassthroughOptions,
    keep: &dyn Fn(&BankYearRow) -> bool,
) -> Result<FitResult, MetricsError> {
    // (row, moderators)
    let mut sample: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut names: Vec<String> = Vec::new();
    match variant {
        Variant::Simple | Variant::NonFundamental => {
            sample = (0..rows.len()).map(|i| (i, Vec::new())).collect();
        }
        Variant::Continuous => {
            names.push("fundamentals".into());
            let lag = lagged_fundamentals(rows);
            sample = lag.iter().enumerate().filter_map(|(i, f)| f.map(|f| (i, alloc::vec![f]))).collect();
        }
        Variant::Strong | Variant::VeryStrong => {
            let (k, top, name) = if *variant == Variant::Strong { (3, 2, "strong") } else { (10, 9, "very_strong") };
            names.push(name.into());
            let bins = lagged_bins(rows, k, opts.cut_mode)?;
            sample = bins.iter().enumerate().filter_map(|(i, bin)| bin.map(|bin| (i, alloc::vec![b(bin == top)]))).collect();
        }
        Variant::Signals(signals) => {
            names.extend(signals.iter().map(|s| s.name().to_string()));
            for (i, r) in rows.iter().enumerate() {
                let v: Option<Vec<f64>> = signals.iter().map(|s| s.value(r)).collect();
                if let Some(v) = v {
                    sample.push((i, v));
                }
            }
        }
    }
    sample.retain(|(i, _)| keep(&rows[*i]));
    let y = sample.iter().map(|(i, _)| b(rows[*i].failure)).collect();
    let mut d = Design::new(y, sample.iter().map(|(i, _)| rows[*i].year as i64).collect());
    let required: &[&str] = if *variant == Variant::NonFundamental {
        d = d
            .column("nonfundamental_run", sample.iter().map(|(i, _)| b(rows[*i].nonfundamental_run)).collect())
            .column("other_run", sample.iter().map(|(i, _)| b(rows[*i].run && !rows[*i].nonfundamental_run)).collect());
        &["nonfundamental_run", "other_run"]
    } else {
        d = d.column("run", sample.iter().map(|(i, _)| b(rows[*i].run)).collect());
        &["run"]
    };
    for (m, name) in names.iter().enumerate() {
        d = d.column(name, sample.iter().map(|(_, v)| v[m]).collect());
    }
    for (m, name) in names.iter().enumerate() {
        d = d.column(&format!("{name}_x_run"), sample.iter().map(|(i, v)| b(rows[*i].run) * v[m]).collect());
    }
    fit_checked(&d, opts.dk_bandwidth, required)
}

/// One regression of failure on a run per decile of lagged fundamentals
/// (index 0 is the weakest decile).
pub fn decile_passthrough(rows: &[BankYearRow], opts: PassthroughOptions) -> Result<Vec<Result<FitResult, MetricsError>>, MetricsError> {
    let bins = lagged_bins(rows, 10, opts.cut_mode)?;
    let mut out = Vec::with_capacity(10);
    for d in 0..10 {
        let members: Vec<&BankYearRow> = rows.iter().zip(&bins).filter(|(_, bin)| **bin == Some(d)).map(|(r, _)| r).collect();
        if !members.iter().any(|r| r.run) {
            out.push(Err(MetricsError::EmptyDecile(d + 1)));
            continue;
        }
        let design = Design::new(members.iter().map(|r| b(r.failure)).collect(), members.iter().map(|r| r.year as i64).collect())
            .column("run", members.iter().map(|r| b(r.run)).collect());
        out.push(fit_checked(&design, opts.dk_bandwidth, &["run"]));
    }
    Ok(out)
}

/// Regressor blocks for the run-prediction models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    Bank,
    Macro,
    Local,
}

pub const MACRO_FEATURES: [&str; 5] = ["nb_failure_rate", "nb_run_rate", "business_failure_rate", "real_gdp_growth", "stock_market_return"];
pub const LOCAL_FEATURES: [&str; 2] = ["run_on_other_bank_in_city", "local_business_failure_rate"];

/// What is predicted one year ahead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Run,
    RunWithoutFailure,
    RunWithFailure,
    Failure,
}

impl Target {
    fn of(self, r: &BankYearRow) -> bool {
        match self {
            Target::Run => r.run,
            Target::RunWithoutFailure => r.run_no_failure,
            Target::RunWithFailure => r.run_with_failure,
            Target::Failure => r.failure,
        }
    }
}

fn group_values(g: FeatureGroup, r: &BankYearRow) -> Option<Vec<f64>> {
    match g {
        FeatureGroup::Bank => r.bank_features(),
        FeatureGroup::Macro => [r.nb_failure_rate, r.nb_run_rate, r.business_failure_rate, r.real_gdp_growth, r.stock_market_return]
            .into_iter()
            .collect(),
        FeatureGroup::Local => Some(alloc::vec![b(r.run_on_other_bank_in_city), r.local_business_failure_rate?]),
    }
}

fn group_names(g: FeatureGroup) -> &'static [&'static str] {
    match g {
        FeatureGroup::Bank => &BANK_FEATURES,
        FeatureGroup::Macro => &MACRO_FEATURES,
        FeatureGroup::Local => &LOCAL_FEATURES,
    }
}

/// Event in t+1 on conditions in t, with the in-sample AUC of the fitted
/// values attached.
pub fn predictability(rows: &[BankYearRow], groups: &[FeatureGroup], target: Target, dk_bandwidth: usize) -> Result<FitResult, MetricsError> {
    let at: BTreeMap<(&str, i32), usize> = rows.iter().enumerate().map(|(i, r)| ((r.bank_id.as_str(), r.year), i)).collect();
    let mut xs: Vec<Vec<f64>> = Vec::new();
    let mut y = Vec::new();
    let mut time = Vec::new();
    for r in rows {
        let Some(&next) = at.get(&(r.bank_id.as_str(), r.year + 1)) else { continue };
        let x: Option<Vec<Vec<f64>>> = groups.iter().map(|g| group_values(*g, r)).collect();
        let Some(x) = x else { continue };
        xs.push(x.concat());
        y.push(b(target.of(&rows[next])));
        time.push(r.year as i64 + 1);
    }
    let labels: Vec<bool> = y.iter().map(|v| *v > 0.5).collect();
    let mut d = Design::new(y, time);
    let mut c = 0;
    for g in groups {
        for name in group_names(*g) {
            d = d.column(name, xs.iter().map(|x| x[c]).collect());
            c += 1;
        }
    }
    let mut fit = fit_ols_dk(&d, FitOptions::bandwidth(dk_bandwidth).dropping())?;
    fit.auc = auc(&linear_predictions(&d, &fit), &labels).ok();
    Ok(fit)
}
