//! Local projections: one direct regression per horizon.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::ols::{fit_ols_dk, Design, FitOptions, FitResult};
use super::passthrough::lagged_bins;
use super::quantile::CutMode;
use super::MetricsError;
use crate::panel::{symmetric_growth, BankYearRow, CityYearRow, TERCILE_STRONG, TERCILE_WEAK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeTransform {
    /// `y_{t+h}`
    Level,
    /// `(y_{t+h} − y_{t−1}) / scale_{t−1}`
    ScaledChange,
    /// Symmetric growth from `t−1` to `t+h`.
    SymmetricGrowth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    Fixed(usize),
    /// max{1, ⌈1.5·h⌉}
    CeilOneAndHalfH,
}

impl BandwidthRule {
    pub fn at(self, h: i32) -> usize {
        match self {
            BandwidthRule::Fixed(b) => b,
            BandwidthRule::CeilOneAndHalfH => {
                // ⌈1.5h⌉ = ⌈3h/2⌉ in integers
                let c = (3 * h as i64 + 1).div_euclid(2);
                c.max(1) as usize
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpSpec {
    /// Inclusive range of horizons.
    pub horizons: (i32, i32),
    /// Lags of every shock and of the outcome's one-period change.
    pub control_lags: usize,
    pub transform: OutcomeTransform,
    pub unit_fe: bool,
    pub time_fe: bool,
    /// Absorb `time mod season`, e.g. 4 for quarter-of-year effects.
    pub season: Option<i64>,
    pub intercept: bool,
    pub bandwidth: BandwidthRule,
    pub min_obs: usize,
}

impl LpSpec {
    /// Bank-level scaled changes, bank and year effects, h = −5..5.
    pub fn bank() -> Self {
        LpSpec {
            horizons: (-5, 5),
            control_lags: 0,
            transform: OutcomeTransform::ScaledChange,
            unit_fe: true,
            time_fe: true,
            season: None,
            intercept: false,
            bandwidth: BandwidthRule::Fixed(3),
            min_obs: 10,
        }
    }

    /// City-level symmetric growth with three lags, h = 0..max_h.
    pub fn city(max_h: i32) -> Self {
        LpSpec {
            horizons: (0, max_h),
            control_lags: 3,
            transform: OutcomeTransform::SymmetricGrowth,
            unit_fe: true,
            time_fe: true,
            season: None,
            intercept: false,
            bandwidth: BandwidthRule::CeilOneAndHalfH,
            min_obs: 10,
        }
    }

    /// State-quarter business failure rates, state and quarter-of-year
    /// effects, h = −20..20, three years of quarters for the bandwidth.
    pub fn business_failures() -> Self {
        LpSpec {
            horizons: (-20, 20),
            control_lags: 0,
            transform: OutcomeTransform::Level,
            unit_fe: true,
            time_fe: false,
            season: Some(4),
            intercept: false,
            bandwidth: BandwidthRule::Fixed(12),
            min_obs: 10,
        }
    }
}

/// Long panel for projections; `scale` is only read by `ScaledChange`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpPanel {
    pub unit: Vec<u64>,
    pub time: Vec<i64>,
    pub outcome: Vec<Option<f64>>,
    pub scale: Vec<Option<f64>>,
    pub shocks: Vec<(String, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpHorizon {
    pub h: i32,
    pub bandwidth: usize,
    pub fit: Result<FitResult, MetricsError>,
    /// Shocks with no variation in this horizon's sample.
    pub zero_shocks: Vec<String>,
}

impl LpHorizon {
    /// Coefficient and standard error for a shock; a shock without
    /// variation has a response of exactly zero.
    pub fn irf(&self, shock: &str) -> Option<(f64, f64)> {
        let fit = self.fit.as_ref().ok()?;
        match fit.index(shock) {
            Some(i) => Some((fit.coefficients[i], fit.dk_se[i])),
            None => self.zero_shocks.iter().any(|s| s == shock).then_some((0.0, 0.0)),
        }
    }
}

fn transformed(t: OutcomeTransform, from: Option<f64>, to: Option<f64>, scale: Option<f64>) -> Option<f64> {
    let (from, to) = (from?, to?);
    match t {
        OutcomeTransform::Level => Some(to),
        OutcomeTransform::ScaledChange => scale.filter(|s| *s > 0.0).map(|s| (to - from) / s),
        OutcomeTransform::SymmetricGrowth => symmetric_growth(from, to).ok(),
    }
}

pub fn local_projection(panel: &LpPanel, spec: &LpSpec) -> Vec<LpHorizon> {
    let at: BTreeMap<(u64, i64), usize> = panel.unit.iter().zip(&panel.time).enumerate().map(|(i, (u, t))| ((*u, *t), i)).collect();
    let get = |u: u64, t: i64| at.get(&(u, t)).copied();
    let y_at = |u: u64, t: i64| get(u, t).and_then(|i| panel.outcome[i]);
    let s_at = |u: u64, t: i64| get(u, t).and_then(|i| panel.scale[i]);
    let (lo, hi) = spec.horizons;
    let mut out = Vec::new();
    for h in lo..=hi {
        let bw = spec.bandwidth.at(h);
        let mut y = Vec::new();
        let mut time = Vec::new();
        let mut units = Vec::new();
        let mut seasons = Vec::new();
        let mut shocks: Vec<Vec<f64>> = alloc::vec![Vec::new(); panel.shocks.len()];
        let mut lag_cols: Vec<Vec<f64>> = alloc::vec![Vec::new(); spec.control_lags * (panel.shocks.len() + 1)];
        'rows: for i in 0..panel.unit.len() {
            let (u, t) = (panel.unit[i], panel.time[i]);
            let Some(v) = transformed(spec.transform, y_at(u, t - 1), y_at(u, t + h as i64), s_at(u, t - 1)) else { continue };
            if panel.shocks.iter().any(|(_, s)| !s[i].is_finite()) {
                continue;
            }
            let mut lags = Vec::with_capacity(lag_cols.len());
            for l in 1..=spec.control_lags as i64 {
                let Some(j) = get(u, t - l) else { continue 'rows };
                for (_, s) in &panel.shocks {
                    lags.push(s[j]);
                }
                let change = match spec.transform {
                    OutcomeTransform::Level => panel.outcome[j],
                    _ => transformed(spec.transform, y_at(u, t - l - 1), panel.outcome[j], s_at(u, t - l - 1)),
                };
                let Some(c) = change else { continue 'rows };
                lags.push(c);
            }
            if lags.iter().any(|v| !v.is_finite()) {
                continue;
            }
            y.push(v);
            time.push(t);
            units.push(u);
            seasons.push(spec.season.map(|s| t.rem_euclid(s) as u64).unwrap_or(0));
            for (k, (_, s)) in panel.shocks.iter().enumerate() {
                shocks[k].push(s[i]);
            }
            for (k, v) in lags.into_iter().enumerate() {
                lag_cols[k].push(v);
            }
        }
        let n = y.len();
        let zero_shocks: Vec<String> =
            panel.shocks.iter().zip(&shocks).filter(|(_, v)| v.iter().all(|x| *x == 0.0)).map(|((name, _), _)| name.clone()).collect();
        if n < spec.min_obs.max(1) {
            out.push(LpHorizon { h, bandwidth: bw, fit: Err(MetricsError::HorizonUnderpopulated { h, n }), zero_shocks });
            continue;
        }
        let mut d = Design::new(y, time.clone()).intercept(spec.intercept);
        if spec.unit_fe {
            d = d.absorb(units);
        }
        if spec.time_fe {
            d = d.absorb(time.iter().map(|t| *t as u64).collect());
        }
        if spec.season.is_some() {
            d = d.absorb(seasons);
        }
        for ((name, _), v) in panel.shocks.iter().zip(shocks) {
            d = d.column(name, v);
        }
        let mut k = 0;
        for l in 1..=spec.control_lags {
            for (name, _) in &panel.shocks {
                d = d.column(&alloc::format!("{name}_l{l}"), core::mem::take(&mut lag_cols[k]));
                k += 1;
            }
            d = d.column(&alloc::format!("outcome_l{l}"), core::mem::take(&mut lag_cols[k]));
            k += 1;
        }
        let fit = fit_ols_dk(&d, FitOptions::bandwidth(bw).dropping());
        out.push(LpHorizon { h, bandwidth: bw, fit, zero_shocks });
    }
    out
}

/// Days from a run to the first failure (or suspension) of the same bank,
/// if any, anchored at the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunWindow {
    pub year: i32,
    pub event_offset: Option<i64>,
}

/// Cumulative probability curve around runs: for each day h, a no-intercept
/// regression of 1[event by day h] on the run dummy over run-anchored
/// windows, so the coefficient is the share of runs followed by the event
/// within h days.
pub fn cumulative_curve(windows: &[RunWindow], horizons: (i32, i32), dk_bandwidth: usize) -> Vec<LpHorizon> {
    (horizons.0..=horizons.1)
        .map(|h| {
            let y = windows.iter().map(|w| if w.event_offset.is_some_and(|o| o <= h as i64) { 1.0 } else { 0.0 }).collect();
            let d = Design::new(y, windows.iter().map(|w| w.year as i64).collect())
                .intercept(false)
                .column("run", alloc::vec![1.0; windows.len()]);
            LpHorizon { h, bandwidth: dk_bandwidth, fit: fit_ols_dk(&d, FitOptions::bandwidth(dk_bandwidth)), zero_shocks: Vec::new() }
        })
        .collect()
}

fn unit_ids<'a>(keys: impl Iterator<Item = &'a str>) -> Vec<u64> {
    let mut map: BTreeMap<&str, u64> = BTreeMap::new();
    keys.map(|k| {
        let next = map.len() as u64;
        *map.entry(k).or_insert(next)
    })
    .collect()
}

/// Shock sets for the bank-level projections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BankShocks {
    RunWithoutFailure,
    /// Run without failure split by upper and lower tercile of lagged
    /// fundamentals.
    StrongWeak,
    /// Non-fundamental and other runs without failure.
    NonFundamental,
}

pub fn bank_panel(
    rows: &[BankYearRow],
    outcome: fn(&BankYearRow) -> Option<f64>,
    shocks: BankShocks,
    cut_mode: CutMode,
) -> Result<LpPanel, MetricsError> {
    let f = |v: bool| if v { 1.0 } else { 0.0 };
    let cols: Vec<(String, Vec<f64>)> = match shocks {
        BankShocks::RunWithoutFailure => alloc::vec![("run_no_failure".into(), rows.iter().map(|r| f(r.run_no_failure)).collect())],
        BankShocks::StrongWeak => {
            let t = lagged_bins(rows, 3, cut_mode)?;
            let pick = |j: usize| rows.iter().zip(&t).map(|(r, b)| f(r.run_no_failure && *b == Some(j))).collect();
            alloc::vec![("run_no_failure_x_strong".into(), pick(TERCILE_STRONG)), ("run_no_failure_x_weak".into(), pick(TERCILE_WEAK))]
        }
        BankShocks::NonFundamental => alloc::vec![
            ("nonfundamental_run_no_failure".into(), rows.iter().map(|r| f(r.run_no_failure && r.nonfundamental_run)).collect()),
            ("other_run_no_failure".into(), rows.iter().map(|r| f(r.run_no_failure && !r.nonfundamental_run)).collect()),
        ],
    };
    Ok(LpPanel {
        unit: unit_ids(rows.iter().map(|r| r.bank_id.as_str())),
        time: rows.iter().map(|r| r.year as i64).collect(),
        outcome: rows.iter().map(outcome).collect(),
        scale: rows.iter().map(|r| r.assets).collect(),
        shocks: cols,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CityShocks {
    Terciles,
    Distress,
}

pub fn city_panel(rows: &[CityYearRow], outcome: fn(&CityYearRow) -> f64, shocks: CityShocks) -> LpPanel {
    let col = |name: &str, f: fn(&CityYearRow) -> f64| (name.to_string(), rows.iter().map(f).collect::<Vec<f64>>());
    let cols = match shocks {
        CityShocks::Terciles => alloc::vec![
            col("run_strong", |c| c.run_strong),
            col("run_intermediate", |c| c.run_intermediate),
            col("run_weak", |c| c.run_weak),
        ],
        CityShocks::Distress => alloc::vec![
            col("run_wo_fail", |c| c.run_wo_fail),
            col("fail_wo_run", |c| c.fail_wo_run),
            col("fail_w_run", |c| c.fail_w_run),
        ],
    };
    LpPanel {
        unit: unit_ids(rows.iter().map(|c| c.city_key.as_str())),
        time: rows.iter().map(|c| c.year as i64).collect(),
        outcome: rows.iter().map(|c| Some(outcome(c))).collect(),
        scale: alloc::vec![None; rows.len()],
        shocks: cols,
    }
}

/// State-quarter observation for the business failure projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateQuarterRow {
    pub state_fips: u8,
    pub year: i32,
    /// 1..=4
    pub quarter: u32,
    pub business_failure_rate: Option<f64>,
    /// Share of the state's banks with a run or failure in the quarter.
    pub distress_share: f64,
}

pub fn state_quarter_panel(rows: &[StateQuarterRow]) -> LpPanel {
    LpPanel {
        unit: rows.iter().map(|r| r.state_fips as u64).collect(),
        time: rows.iter().map(|r| r.year as i64 * 4 + r.quarter as i64 - 1).collect(),
        outcome: rows.iter().map(|r| r.business_failure_rate).collect(),
        scale: alloc::vec![None; rows.len()],
        shocks: alloc::vec![("distress_share".into(), rows.iter().map(|r| r.distress_share).collect())],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bandwidth_rule() {
        let r = BandwidthRule::CeilOneAndHalfH;
        assert_eq!([r.at(-2), r.at(0), r.at(1), r.at(2), r.at(3), r.at(5)], [1, 1, 2, 3, 5, 8]);
        assert_eq!(BandwidthRule::Fixed(3).at(7), 3);
    }

    #[test]
    fn four_of_ten_by_day_thirty() {
        let windows: Vec<RunWindow> = (0..10)
            .map(|i| RunWindow { year: 1900 + i, event_offset: match i { 0 => Some(2), 1 => Some(10), 2 => Some(30), 3 => Some(-3), 4 => Some(31), _ => None } })
            .collect();
        let curve = cumulative_curve(&windows, (-5, 40), 3);
        let at = |h: i32| curve.iter().find(|c| c.h == h).unwrap().fit.as_ref().unwrap().coef("run").unwrap();
        assert_eq!(at(30), 0.4);
        assert_eq!(at(-5), 0.0);
        assert_eq!(at(-3), 0.1);
        assert_eq!(at(40), 0.5);
    }

    #[test]
    fn normalization_horizon_is_zero() {
        let mut p = LpPanel::default();
        for u in 0..6u64 {
            for t in 0..8i64 {
                p.unit.push(u);
                p.time.push(t);
                p.outcome.push(Some(((u * 7 + t as u64 * 3) % 5) as f64));
                p.scale.push(Some(10.0));
            }
        }
        p.shocks.push(("s".into(), (0..48).map(|i| ((i * 5) % 3) as f64).collect()));
        let mut spec = LpSpec::bank();
        spec.horizons = (-1, -1);
        let res = local_projection(&p, &spec);
        let (b, _) = res[0].irf("s").unwrap();
        assert!(b.abs() < 1e-12);
    }
}
