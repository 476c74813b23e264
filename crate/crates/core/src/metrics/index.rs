//! Expanding-window fundamentals index.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::linalg::{independent_columns, Cholesky, Mat};
use super::ols::RANK_TOLERANCE;

#[derive(Debug, Clone, PartialEq)]
pub struct IndexRow<K> {
    pub unit: K,
    pub year: i32,
    /// Balance-sheet ratios at `year`; `None` when any is missing.
    pub features: Option<Vec<f64>>,
    /// Whether the unit failed during `year`.
    pub failure: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexConfig {
    pub min_years: usize,
    pub min_failures: usize,
}

impl Default for IndexConfig {
    fn default() -> Self {
        IndexConfig { min_years: 3, min_failures: 5 }
    }
}

struct Accum {
    gram: Mat,
    xty: Vec<f64>,
    years: BTreeSet<i32>,
    failures: usize,
}

/// For every row at year t, minus the predicted probability of failure from
/// a linear probability model trained on pairs (features at s, failure at
/// s+1) with s+1 ≤ t−1, evaluated at the row's own features. Rows in years
/// whose training window is too thin, and rows without features, get `None`.
pub fn fundamentals_index<K: Ord + Clone>(rows: &[IndexRow<K>], cfg: IndexConfig) -> Vec<Option<f64>> {
    let Some(k) = rows.iter().find_map(|r| r.features.as_ref().map(|f| f.len() + 1)) else {
        return vec![None; rows.len()];
    };
    let at: BTreeMap<(K, i32), usize> = rows.iter().enumerate().map(|(i, r)| ((r.unit.clone(), r.year), i)).collect();

    // training pairs keyed by outcome year
    let mut pairs: BTreeMap<i32, Vec<(usize, bool)>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        let Some(f) = &r.features else { continue };
        if f.len() + 1 != k || f.iter().any(|v| !v.is_finite()) {
            continue;
        }
        if let Some(&j) = at.get(&(r.unit.clone(), r.year + 1)) {
            pairs.entry(r.year + 1).or_default().push((i, rows[j].failure));
        }
    }

    let mut by_year: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        by_year.entry(r.year).or_default().push(i);
    }

    let mut acc = Accum { gram: Mat::zeros(k), xty: vec![0.0; k], years: BTreeSet::new(), failures: 0 };
    let mut pending = pairs.iter().peekable();
    let mut out = vec![None; rows.len()];
    let mut x = vec![0.0; k];
    for (&t, members) in &by_year {
        while let Some((&oy, list)) = pending.peek() {
            if oy > t - 1 {
                break;
            }
            for &(i, failed) in list.iter() {
                let f = rows[i].features.as_ref().unwrap();
                x[0] = 1.0;
                x[1..].copy_from_slice(f);
                let yv = if failed { 1.0 } else { 0.0 };
                for a in 0..k {
                    acc.xty[a] += x[a] * yv;
                    for b in 0..k {
                        acc.gram[(a, b)] += x[a] * x[b];
                    }
                }
                acc.failures += failed as usize;
            }
            acc.years.insert(oy);
            pending.next();
        }
        if acc.years.len() < cfg.min_years || acc.failures < cfg.min_failures {
            continue;
        }
        let Some(beta) = solve_dropping(&acc.gram, &acc.xty) else { continue };
        for &i in members {
            let Some(f) = &rows[i].features else { continue };
            if f.len() + 1 != k || f.iter().any(|v| !v.is_finite()) {
                continue;
            }
            let p = beta[0] + f.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>();
            out[i] = Some(-p);
        }
    }
    out
}

/// Least squares from accumulated normal equations; spanned columns get a
/// zero coefficient.
fn solve_dropping(gram: &Mat, xty: &[f64]) -> Option<Vec<f64>> {
    let refs: Vec<f64> = (0..gram.n).map(|i| gram[(i, i)]).collect();
    let keep = independent_columns(gram, &refs, RANK_TOLERANCE);
    if keep.is_empty() {
        return None;
    }
    let sub = gram.submatrix(&keep);
    let rhs: Vec<f64> = keep.iter().map(|&j| xty[j]).collect();
    let b = Cholesky::new(&sub)?.solve(&rhs);
    let mut beta = vec![0.0; gram.n];
    for (a, &j) in keep.iter().enumerate() {
        beta[j] = b[a];
    }
    Some(beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(constant: bool) -> Vec<IndexRow<u32>> {
        let mut rows = Vec::new();
        for year in 1900..1910 {
            for unit in 0..40u32 {
                let ratio = if constant { 0.5 } else { (unit % 10) as f64 / 10.0 };
                rows.push(IndexRow { unit, year, features: Some(vec![ratio]), failure: unit % 10 == 0 && year % 2 == 0 });
            }
        }
        rows
    }

    #[test]
    fn burn_in_then_defined() {
        let rows = panel(false);
        let idx = fundamentals_index(&rows, IndexConfig::default());
        for (r, v) in rows.iter().zip(&idx) {
            // three outcome years exist from 1904, five failures only from 1905
            assert_eq!(v.is_some(), r.year >= 1905, "{}", r.year);
        }
        // low ratio units fail, so they score lowest
        let a = idx[rows.iter().position(|r| r.year == 1905 && r.unit == 0).unwrap()].unwrap();
        let b = idx[rows.iter().position(|r| r.year == 1905 && r.unit == 9).unwrap()].unwrap();
        assert!(a < b);
    }

    #[test]
    fn constant_features_give_constant_index() {
        let rows = panel(true);
        let idx = fundamentals_index(&rows, IndexConfig::default());
        let vals: Vec<f64> = rows.iter().zip(&idx).filter(|(r, _)| r.year == 1907).map(|(_, v)| v.unwrap()).collect();
        assert!(vals.iter().all(|v| (v - vals[0]).abs() < 1e-12));
    }
}
