use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::ols::{fit_ols_dk, Design, FitOptions, FitResult};
use super::MetricsError;

/// Thirty-six months: three years on a monthly panel.
pub const MONTHLY_DK_BANDWIDTH: usize = 36;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateMonthCount {
    pub state_fips: u8,
    pub year: i32,
    pub month: u32,
    pub count: f64,
}

/// Narrative crisis chronologies. Each is required.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrisisSeries {
    pub crisis_years: Option<BTreeSet<i32>>,
    pub panic_months: Option<BTreeSet<(i32, u32)>>,
    /// (state, year, month)
    pub regional_panics: Option<BTreeSet<(u8, i32, u32)>>,
}

type Series<'a> = (&'a BTreeSet<i32>, &'a BTreeSet<(i32, u32)>, &'a BTreeSet<(u8, i32, u32)>);

fn series(s: &CrisisSeries) -> Result<Series<'_>, MetricsError> {
    Ok((
        s.crisis_years.as_ref().ok_or_else(|| MetricsError::MissingSeries("crisis_years".into()))?,
        s.panic_months.as_ref().ok_or_else(|| MetricsError::MissingSeries("panic_months".into()))?,
        s.regional_panics.as_ref().ok_or_else(|| MetricsError::MissingSeries("regional_panics".into()))?,
    ))
}

fn base(counts: &[StateMonthCount], s: Series<'_>) -> Design {
    let (years, months, regional) = s;
    let f = |v: bool| if v { 1.0 } else { 0.0 };
    Design::new(counts.iter().map(|c| c.count).collect(), counts.iter().map(|c| c.year as i64 * 12 + c.month as i64 - 1).collect())
        .column("crisis_year", counts.iter().map(|c| f(years.contains(&c.year))).collect())
        .column("panic_month", counts.iter().map(|c| f(months.contains(&(c.year, c.month)))).collect())
        .column("regional_panic", counts.iter().map(|c| f(regional.contains(&(c.state_fips, c.year, c.month)))).collect())
}

/// Distress counts per state-month on the three crisis dummies.
pub fn crisis_correlation(counts: &[StateMonthCount], s: &CrisisSeries, dk_bandwidth: usize) -> Result<FitResult, MetricsError> {
    let d = base(counts, series(s)?);
    fit_ols_dk(&d, FitOptions::bandwidth(dk_bandwidth).dropping())
}

/// Same, with the regional dummy replaced by one dummy per named regional
/// episode.
pub fn crisis_correlation_by_episode(
    counts: &[StateMonthCount],
    s: &CrisisSeries,
    episodes: &[(String, BTreeSet<(u8, i32, u32)>)],
    dk_bandwidth: usize,
) -> Result<FitResult, MetricsError> {
    let (years, months, _) = series(s)?;
    let f = |v: bool| if v { 1.0 } else { 0.0 };
    let mut d = Design::new(counts.iter().map(|c| c.count).collect(), counts.iter().map(|c| c.year as i64 * 12 + c.month as i64 - 1).collect())
        .column("crisis_year", counts.iter().map(|c| f(years.contains(&c.year))).collect())
        .column("panic_month", counts.iter().map(|c| f(months.contains(&(c.year, c.month)))).collect());
    for (name, cells) in episodes {
        let col: Vec<f64> = counts.iter().map(|c| f(cells.contains(&(c.state_fips, c.year, c.month)))).collect();
        d = d.column(name, col);
    }
    fit_ols_dk(&d, FitOptions::bandwidth(dk_bandwidth).dropping())
}
