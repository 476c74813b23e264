//! Rank-based tercile and decile assignment.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::MetricsError;

/// Which observations define the cutpoints for a year's bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutMode {
    /// Everything observed up to and including the year.
    #[default]
    Expanding,
    FullSample,
}

fn distinct(values: impl Iterator<Item = f64>) -> usize {
    values.map(f64::to_bits).collect::<BTreeSet<_>>().len()
}

/// Bin index in `0..k` (0 = lowest) for each item. Items are ranked by value
/// with ties broken by key, and rank r of n goes to bin ⌊r·k/n⌋, so every bin
/// holds ⌊n/k⌋ or ⌈n/k⌉ items.
pub fn rank_bins<K: Ord>(items: &[(f64, K)], k: usize) -> Result<Vec<usize>, MetricsError> {
    if items.iter().any(|(v, _)| !v.is_finite()) {
        return Err(MetricsError::NonFiniteInput("quantile values".into()));
    }
    let d = distinct(items.iter().map(|(v, _)| *v));
    if d < k {
        return Err(MetricsError::DecileDegeneracy { bins: k, distinct: d });
    }
    let n = items.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| items[a].0.total_cmp(&items[b].0).then_with(|| items[a].1.cmp(&items[b].1)));
    let mut out = vec![0; n];
    for (r, &i) in order.iter().enumerate() {
        out[i] = r * k / n;
    }
    Ok(out)
}

/// Bins computed against the pooled history of each item's period: an item
/// at period t is ranked among all items with period ≤ t. Periods whose
/// history holds fewer than `k` items get `None`.
pub fn expanding_bins<K: Ord>(items: &[(i32, f64, K)], k: usize) -> Result<Vec<Option<usize>>, MetricsError> {
    if items.iter().any(|(_, v, _)| !v.is_finite()) {
        return Err(MetricsError::NonFiniteInput("quantile values".into()));
    }
    let n = items.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        items[a].1.total_cmp(&items[b].1).then_with(|| items[a].2.cmp(&items[b].2)).then_with(|| items[a].0.cmp(&items[b].0))
    });
    let periods: BTreeSet<i32> = items.iter().map(|it| it.0).collect();
    let mut out = vec![None; n];
    for &t in &periods {
        let size = items.iter().filter(|it| it.0 <= t).count();
        if size < k {
            continue;
        }
        let mut rank = 0;
        for &i in &order {
            let p = items[i].0;
            if p > t {
                continue;
            }
            if p == t {
                out[i] = Some(rank * k / size);
            }
            rank += 1;
        }
    }
    Ok(out)
}

/// Expanding or full-sample bins for (period, value, key) items.
pub fn bins<K: Ord + Clone>(items: &[(i32, f64, K)], k: usize, mode: CutMode) -> Result<Vec<Option<usize>>, MetricsError> {
    match mode {
        CutMode::Expanding => expanding_bins(items, k),
        CutMode::FullSample => {
            let flat: Vec<(f64, K)> = items.iter().map(|(_, v, key)| (*v, key.clone())).collect();
            Ok(rank_bins(&flat, k)?.into_iter().map(Some).collect())
        }
    }
}
