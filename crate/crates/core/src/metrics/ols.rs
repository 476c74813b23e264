//! Least squares with absorbed fixed effects and Driscoll–Kraay covariance.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::linalg::{independent_columns, Cholesky, Mat};
use super::MetricsError;

pub const FE_TOLERANCE: f64 = 1e-10;
pub const FE_MAX_ITER: usize = 10_000;
/// Squared residual norm, relative to the raw column's, below which a column
/// counts as spanned by earlier ones.
pub const RANK_TOLERANCE: f64 = 1e-10;
pub const INTERCEPT: &str = "const";

/// A regression problem in columnar form.
#[derive(Debug, Clone, Default)]
pub struct Design {
    pub y: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
    pub intercept: bool,
    /// One id vector per absorbed fixed-effect dimension.
    pub fixed_effects: Vec<Vec<u64>>,
    /// Time index used to sum scores for the Driscoll–Kraay estimator.
    pub time: Vec<i64>,
    pub weights: Option<Vec<f64>>,
}

impl Design {
    pub fn new(y: Vec<f64>, time: Vec<i64>) -> Self {
        Design { y, time, intercept: true, ..Default::default() }
    }

    pub fn column(mut self, name: &str, values: Vec<f64>) -> Self {
        self.columns.push((name.to_string(), values));
        self
    }

    pub fn intercept(mut self, on: bool) -> Self {
        self.intercept = on;
        self
    }

    pub fn absorb(mut self, ids: Vec<u64>) -> Self {
        self.fixed_effects.push(ids);
        self
    }

    pub fn weights(mut self, w: Vec<f64>) -> Self {
        self.weights = Some(w);
        self
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitOptions {
    pub dk_bandwidth: usize,
    /// Drop spanned columns and report them instead of failing.
    pub drop_collinear: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { dk_bandwidth: 3, drop_collinear: false }
    }
}

impl FitOptions {
    pub fn bandwidth(b: usize) -> Self {
        FitOptions { dk_bandwidth: b, ..Default::default() }
    }

    pub fn dropping(mut self) -> Self {
        self.drop_collinear = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub terms: Vec<String>,
    pub coefficients: Vec<f64>,
    pub dk_se: Vec<f64>,
    /// Row-major, `terms.len()` squared.
    pub covariance: Vec<f64>,
    pub n_obs: usize,
    pub mean_dep_var: f64,
    pub r_squared: f64,
    pub auc: Option<f64>,
    pub dropped: Vec<String>,
    /// Largest absolute entry of Xᵀe on the transformed design.
    pub max_score: f64,
    pub dk_bandwidth: usize,
}

impl FitResult {
    pub fn index(&self, term: &str) -> Option<usize> {
        self.terms.iter().position(|t| t == term)
    }

    pub fn coef(&self, term: &str) -> Option<f64> {
        self.index(term).map(|i| self.coefficients[i])
    }

    pub fn se(&self, term: &str) -> Option<f64> {
        self.index(term).map(|i| self.dk_se[i])
    }

    pub fn cov(&self, i: usize, j: usize) -> f64 {
        self.covariance[i * self.terms.len() + j]
    }

    pub fn covariance_matrix(&self) -> Mat {
        Mat { n: self.terms.len(), data: self.covariance.clone() }
    }
}

/// Maps arbitrary ids to 0..groups.
fn dense_ids(ids: &[u64]) -> (Vec<usize>, usize) {
    let mut map = BTreeMap::new();
    let out = ids
        .iter()
        .map(|id| {
            let next = map.len();
            *map.entry(*id).or_insert(next)
        })
        .collect();
    (out, map.len())
}

struct Absorber {
    dims: Vec<(Vec<usize>, Vec<f64>)>,
}

impl Absorber {
    fn new(fes: &[Vec<u64>], w: &[f64]) -> Self {
        let dims = fes
            .iter()
            .map(|ids| {
                let (g, k) = dense_ids(ids);
                let mut tot = vec![0.0; k];
                for (i, &gi) in g.iter().enumerate() {
                    tot[gi] += w[i];
                }
                (g, tot)
            })
            .collect();
        Absorber { dims }
    }

    /// Alternating weighted demeaning until a sweep moves no entry by more
    /// than the tolerance (scaled by the column magnitude).
    fn absorb(&self, v: &mut [f64], w: &[f64]) -> Result<(), MetricsError> {
        if self.dims.is_empty() {
            return Ok(());
        }
        let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for _ in 0..FE_MAX_ITER {
            let mut moved = 0.0f64;
            for (g, tot) in &self.dims {
                let mut sums = vec![0.0; tot.len()];
                for (i, &gi) in g.iter().enumerate() {
                    sums[gi] += w[i] * v[i];
                }
                for (i, &gi) in g.iter().enumerate() {
                    let m = sums[gi] / tot[gi];
                    v[i] -= m;
                    moved = moved.max(m.abs());
                }
            }
            if moved <= FE_TOLERANCE * scale || self.dims.len() == 1 {
                return Ok(());
            }
        }
        Err(MetricsError::NotConverged(FE_MAX_ITER))
    }
}

fn check_finite(name: &str, v: &[f64]) -> Result<(), MetricsError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(MetricsError::NonFiniteInput(name.to_string()))
    }
}

/// Fits `design` by least squares and returns coefficients with
/// Driscoll–Kraay standard errors.
pub fn fit_ols_dk(design: &Design, opts: FitOptions) -> Result<FitResult, MetricsError> {
    let n = design.n();
    let shape_ok = design.time.len() == n
        && design.columns.iter().all(|(_, c)| c.len() == n)
        && design.fixed_effects.iter().all(|f| f.len() == n)
        && design.weights.as_ref().is_none_or(|w| w.len() == n);
    if !shape_ok {
        return Err(MetricsError::Shape("column lengths differ".into()));
    }
    check_finite("y", &design.y)?;
    for (name, c) in &design.columns {
        check_finite(name, c)?;
    }
    let w: Vec<f64> = match &design.weights {
        Some(w) => {
            if w.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(MetricsError::NonFiniteInput("weights".into()));
            }
            w.clone()
        }
        None => vec![1.0; n],
    };

    let intercept = design.intercept && design.fixed_effects.is_empty();
    let mut names: Vec<String> = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    if intercept {
        names.push(INTERCEPT.to_string());
        cols.push(vec![1.0; n]);
    }
    for (name, c) in &design.columns {
        names.push(name.clone());
        cols.push(c.clone());
    }
    let k_all = cols.len();
    if n == 0 || k_all == 0 {
        return Err(MetricsError::InsufficientData { n, k: k_all });
    }

    let reference: Vec<f64> = cols.iter().map(|c| c.iter().zip(&w).map(|(x, wi)| wi * x * x).sum()).collect();
    let absorber = Absorber::new(&design.fixed_effects, &w);
    let mut y = design.y.clone();
    absorber.absorb(&mut y, &w)?;
    for c in cols.iter_mut() {
        absorber.absorb(c, &w)?;
    }
    let sw: Vec<f64> = w.iter().map(|x| libm::sqrt(*x)).collect();
    for (i, s) in sw.iter().enumerate() {
        y[i] *= s;
        for c in cols.iter_mut() {
            c[i] *= s;
        }
    }

    let mut gram = Mat::zeros(k_all);
    for a in 0..k_all {
        for b in 0..=a {
            let v: f64 = cols[a].iter().zip(&cols[b]).map(|(x, z)| x * z).sum();
            gram[(a, b)] = v;
            gram[(b, a)] = v;
        }
    }
    let keep = independent_columns(&gram, &reference, RANK_TOLERANCE);
    let dropped: Vec<String> = (0..k_all).filter(|j| !keep.contains(j)).map(|j| names[j].clone()).collect();
    if !dropped.is_empty() && !opts.drop_collinear {
        return Err(MetricsError::RankDeficient(dropped));
    }
    let k = keep.len();
    if k == 0 || n <= k {
        return Err(MetricsError::InsufficientData { n, k });
    }
    let xtx = gram.submatrix(&keep);
    let chol = Cholesky::new(&xtx).ok_or_else(|| MetricsError::RankDeficient(keep.iter().map(|&j| names[j].clone()).collect()))?;
    let xty: Vec<f64> = keep.iter().map(|&j| cols[j].iter().zip(&y).map(|(x, v)| x * v).sum()).collect();
    let beta = chol.solve(&xty);
    let bread = chol.inverse();

    let mut e = y.clone();
    for (a, &j) in keep.iter().enumerate() {
        for i in 0..n {
            e[i] -= beta[a] * cols[j][i];
        }
    }

    // h_t = Σ_i x_it e_it, summed within each time period
    let mut scores: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    let mut max_score = 0.0f64;
    let mut totals = vec![0.0; k];
    for i in 0..n {
        let h = scores.entry(design.time[i]).or_insert_with(|| vec![0.0; k]);
        for (a, &j) in keep.iter().enumerate() {
            let s = cols[j][i] * e[i];
            h[a] += s;
            totals[a] += s;
        }
    }
    for t in totals {
        max_score = max_score.max(t.abs());
    }
    let b = opts.dk_bandwidth;
    let mut meat = Mat::zeros(k);
    for (t, h) in &scores {
        for l in 0..=b {
            let Some(hl) = scores.get(&(t - l as i64)) else { continue };
            let wl = if l == 0 { 1.0 } else { 1.0 - l as f64 / (b as f64 + 1.0) };
            for p in 0..k {
                for q in 0..k {
                    let g = h[p] * hl[q];
                    meat[(p, q)] += wl * g;
                    if l > 0 {
                        meat[(q, p)] += wl * g;
                    }
                }
            }
        }
    }
    let mut cov = bread.mul(&meat).mul(&bread);
    cov.scale(n as f64 / (n - k) as f64);
    cov.symmetrize();

    let wsum: f64 = w.iter().sum();
    let mean_dep_var = design.y.iter().zip(&w).map(|(v, wi)| v * wi).sum::<f64>() / wsum;
    let ssr: f64 = e.iter().map(|v| v * v).sum();
    let tss: f64 = if intercept || !design.fixed_effects.is_empty() {
        design.y.iter().zip(&w).map(|(v, wi)| wi * (v - mean_dep_var) * (v - mean_dep_var)).sum()
    } else {
        design.y.iter().zip(&w).map(|(v, wi)| wi * v * v).sum()
    };
    let r_squared = if tss > 0.0 { 1.0 - ssr / tss } else if ssr == 0.0 { 1.0 } else { 0.0 };

    let dk_se = (0..k).map(|i| libm::sqrt(cov[(i, i)].max(0.0))).collect();
    Ok(FitResult {
        terms: keep.iter().map(|&j| names[j].clone()).collect(),
        coefficients: beta,
        dk_se,
        covariance: cov.data,
        n_obs: n,
        mean_dep_var,
        r_squared,
        auc: None,
        dropped,
        max_score,
        dk_bandwidth: b,
    })
}

/// Fitted values `Xβ` on the untransformed regressors (intercept included
/// when it was estimated). Fixed effects are not added back.
pub fn linear_predictions(design: &Design, fit: &FitResult) -> Vec<f64> {
    let n = design.n();
    let mut out = vec![fit.coef(INTERCEPT).unwrap_or(0.0); n];
    for (name, c) in &design.columns {
        if let Some(b) = fit.coef(name) {
            for i in 0..n {
                out[i] += b * c[i];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit_has_zero_errors() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let d = Design::new(y, (0..10).collect()).column("x", x).intercept(false);
        let f = fit_ols_dk(&d, FitOptions::bandwidth(0)).unwrap();
        assert!((f.coef("x").unwrap() - 2.0).abs() < 1e-14);
        assert!(f.se("x").unwrap() < 1e-12);
    }

    #[test]
    fn zero_column_is_rank_deficient() {
        let d = Design::new(vec![1.0, 0.0, 1.0], vec![0, 1, 2]).column("z", vec![0.0; 3]);
        assert_eq!(fit_ols_dk(&d, FitOptions::default()), Err(MetricsError::RankDeficient(vec!["z".into()])));
        let f = fit_ols_dk(&d, FitOptions::default().dropping()).unwrap();
        assert_eq!(f.dropped, ["z"]);
        assert_eq!(f.terms, [INTERCEPT]);
    }

    #[test]
    fn one_way_fe_matches_group_demeaning() {
        // y = a_g + 3x
        let g = vec![1, 1, 1, 2, 2, 2];
        let x = vec![0.0, 1.0, 2.0, 5.0, 1.0, 0.5];
        let y: Vec<f64> = x.iter().zip(&g).map(|(x, g)| 3.0 * x + if *g == 1 { 10.0 } else { -4.0 }).collect();
        let d = Design::new(y, vec![0, 1, 2, 0, 1, 2]).column("x", x).absorb(g);
        let f = fit_ols_dk(&d, FitOptions::default()).unwrap();
        assert!((f.coef("x").unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn nonfinite_rejected() {
        let d = Design::new(vec![1.0, f64::NAN], vec![0, 1]);
        assert!(matches!(fit_ols_dk(&d, FitOptions::default()), Err(MetricsError::NonFiniteInput(_))));
    }
}
