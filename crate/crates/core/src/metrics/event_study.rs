use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::ols::{fit_ols_dk, Design, FitOptions};
use super::MetricsError;
use crate::panel::{BankYearRow, EventKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindEstimate {
    pub kind: EventKind,
    /// `Ok(None)` where the kind is structurally undefined (failed banks
    /// after failure); `Err(EmptyEventType)` where it has no rows.
    pub value: Result<Option<(f64, f64)>, MetricsError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventStudyHorizon {
    pub h: i32,
    pub n_obs: usize,
    pub estimates: Vec<KindEstimate>,
}

impl EventStudyHorizon {
    pub fn get(&self, kind: EventKind) -> Option<f64> {
        self.estimates.iter().find(|e| e.kind == kind).and_then(|e| e.value.clone().ok().flatten()).map(|v| v.0)
    }
}

/// Average level of `outcome` at t+h for each of the four event kinds at t:
/// a no-intercept regression on the kind dummies plus year effects coded to
/// sum to zero. Failure kinds are only estimated for h < 0.
pub fn event_study(
    rows: &[BankYearRow],
    outcome: fn(&BankYearRow) -> Option<f64>,
    horizons: (i32, i32),
    dk_bandwidth: usize,
) -> Result<Vec<EventStudyHorizon>, MetricsError> {
    let at: BTreeMap<(&str, i32), usize> = rows.iter().enumerate().map(|(i, r)| ((r.bank_id.as_str(), r.year), i)).collect();
    let mut out = Vec::new();
    for h in horizons.0..=horizons.1 {
        let mut y = Vec::new();
        let mut kinds = Vec::new();
        let mut years = Vec::new();
        for r in rows {
            let kind = r.event_kind();
            if kind.is_failure() && h >= 0 {
                continue;
            }
            let Some(v) = at.get(&(r.bank_id.as_str(), r.year + h)).and_then(|&j| outcome(&rows[j])) else { continue };
            if !v.is_finite() {
                return Err(MetricsError::NonFiniteInput("event study outcome".into()));
            }
            y.push(v);
            kinds.push(kind);
            years.push(r.year);
        }
        let present: BTreeSet<EventKind> = kinds.iter().copied().collect();
        let mut estimates: Vec<KindEstimate> = EventKind::ALL
            .iter()
            .map(|&kind| KindEstimate {
                kind,
                value: if (kind.is_failure() && h >= 0) || present.contains(&kind) {
                    Ok(None)
                } else {
                    Err(MetricsError::EmptyEventType(kind.as_str().to_string()))
                },
            })
            .collect();
        let n = y.len();
        if present.is_empty() {
            out.push(EventStudyHorizon { h, n_obs: 0, estimates });
            continue;
        }
        let mut d = Design::new(y, years.iter().map(|y| *y as i64).collect()).intercept(false);
        for kind in EventKind::ALL.iter().filter(|k| present.contains(k)) {
            d = d.column(kind.as_str(), kinds.iter().map(|k| if k == kind { 1.0 } else { 0.0 }).collect());
        }
        let distinct: Vec<i32> = years.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        if let Some((&last, rest)) = distinct.split_last() {
            for &yr in rest {
                let col = years.iter().map(|y| if *y == yr { 1.0 } else if *y == last { -1.0 } else { 0.0 }).collect();
                d = d.column(&format!("year_{yr}"), col);
            }
        }
        let fit = fit_ols_dk(&d, FitOptions::bandwidth(dk_bandwidth).dropping())?;
        for e in estimates.iter_mut() {
            if present.contains(&e.kind) && !(e.kind.is_failure() && h >= 0) {
                e.value = match fit.index(e.kind.as_str()) {
                    Some(i) => Ok(Some((fit.coefficients[i], fit.dk_se[i]))),
                    None => Err(MetricsError::RankDeficient(alloc::vec![e.kind.as_str().to_string()])),
                };
            }
        }
        out.push(EventStudyHorizon { h, n_obs: n, estimates });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(bank: &str, year: i32, y: f64, kind: EventKind) -> BankYearRow {
        BankYearRow {
            bank_id: bank.into(),
            year,
            deposits_to_assets: Some(y),
            run: kind == EventKind::RunWithoutFailure || kind == EventKind::FailureWithRun,
            run_no_failure: kind == EventKind::RunWithoutFailure,
            failure: kind.is_failure(),
            failure_with_run: kind == EventKind::FailureWithRun,
            ..Default::default()
        }
    }

    #[test]
    fn group_means_without_year_effects() {
        // outcome 0.7 everywhere except the run bank in its run year, its last
        let mut rows = Vec::new();
        for b in ["a", "b", "c"] {
            let last = if b == "a" { 1903 } else { 1905 };
            for year in 1900..=last {
                let run = b == "a" && year == 1903;
                let kind = if run { EventKind::RunWithoutFailure } else { EventKind::NoEvent };
                rows.push(row(b, year, if run { 0.5 } else { 0.7 }, kind));
            }
        }
        rows.push(row("f", 1902, 0.7, EventKind::NoEvent));
        rows.push(row("f", 1903, 0.7, EventKind::FailureWithoutRun));
        let res = event_study(&rows, |r| r.deposits_to_assets, (-1, 2), 3).unwrap();
        let h0 = res.iter().find(|r| r.h == 0).unwrap();
        assert!((h0.get(EventKind::RunWithoutFailure).unwrap() - 0.5).abs() < 1e-12);
        let fail = h0.estimates.iter().find(|e| e.kind == EventKind::FailureWithoutRun).unwrap();
        assert_eq!(fail.value, Ok(None));
        let with_run = h0.estimates.iter().find(|e| e.kind == EventKind::FailureWithRun).unwrap();
        assert_eq!(with_run.value, Ok(None));
        let hm1 = res.iter().find(|r| r.h == -1).unwrap();
        assert!((hm1.get(EventKind::FailureWithoutRun).unwrap() - 0.7).abs() < 1e-12);
        assert!((h0.get(EventKind::NoEvent).unwrap() - 0.7).abs() < 1e-12);
        assert!(matches!(
            hm1.estimates.iter().find(|e| e.kind == EventKind::FailureWithRun).unwrap().value,
            Err(MetricsError::EmptyEventType(_))
        ));
    }
}
