use bankrun_core::metrics::{fit_ols_dk, Design, FitOptions};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two-way fixed effects by explicit dummies, solved with an SVD.
fn dummy_regression(x: &[Vec<f64>], y: &[f64], a: &[u64], b: &[u64]) -> Vec<f64> {
    let n = y.len();
    let na = *a.iter().max().unwrap() as usize + 1;
    let nb = *b.iter().max().unwrap() as usize + 1;
    let k = x.len();
    let cols = k + na + nb - 1;
    let m = DMatrix::from_fn(n, cols, |i, j| {
        if j < k {
            x[j][i]
        } else if j < k + na {
            (a[i] as usize == j - k) as u8 as f64
        } else {
            // first level of b is the omitted category
            (b[i] as usize == j - k - na + 1) as u8 as f64
        }
    });
    let sol = m.svd(true, true).solve(&DVector::from_column_slice(y), 1e-12).unwrap();
    sol.iter().take(k).copied().collect()
}

#[test]
fn two_way_absorption_matches_dummies() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    while checked < 50 {
        let n = rng.random_range(20..=200);
        let na = rng.random_range(2..=8) as u64;
        let nb = rng.random_range(2..=6) as u64;
        let a: Vec<u64> = (0..n).map(|_| rng.random_range(0..na)).collect();
        let b: Vec<u64> = (0..n).map(|_| rng.random_range(0..nb)).collect();
        // every level must occur for the dummy layout above
        if (0..na).any(|l| !a.contains(&l)) || (0..nb).any(|l| !b.contains(&l)) {
            continue;
        }
        let x1: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x2: Vec<f64> = (0..n).map(|i| rng.random_range(-1.0..1.0) + 0.3 * a[i] as f64).collect();
        let y: Vec<f64> = (0..n).map(|i| 2.0 * x1[i] - x2[i] + a[i] as f64 * 0.5 - b[i] as f64 + rng.random_range(-0.5..0.5)).collect();
        let d = Design::new(y.clone(), b.iter().map(|v| *v as i64).collect())
            .column("x1", x1.clone())
            .column("x2", x2.clone())
            .absorb(a.clone())
            .absorb(b.clone());
        let fit = fit_ols_dk(&d, FitOptions::bandwidth(1)).unwrap();
        let want = dummy_regression(&[x1, x2], &y, &a, &b);
        for (g, w) in fit.coefficients.iter().zip(&want) {
            assert!((g - w).abs() < 1e-8, "{g} vs {w}");
        }
        checked += 1;
    }
}

#[test]
fn weighted_fit_matches_replicated_rows() {
    // integer weights equal replicated observations for point estimates
    let x = vec![0.0, 1.0, 2.0, 3.0, 4.0];
    let y = vec![1.0, 2.5, 2.9, 4.2, 5.1];
    let w = vec![1.0, 2.0, 1.0, 3.0, 1.0];
    let d = Design::new(y.clone(), vec![0, 1, 2, 3, 4]).column("x", x.clone()).weights(w.clone());
    let fit = fit_ols_dk(&d, FitOptions::bandwidth(0)).unwrap();
    let (mut xr, mut yr) = (Vec::new(), Vec::new());
    for i in 0..5 {
        for _ in 0..w[i] as usize {
            xr.push(x[i]);
            yr.push(y[i]);
        }
    }
    let n = xr.len();
    let rep = fit_ols_dk(&Design::new(yr, (0..n as i64).collect()).column("x", xr), FitOptions::bandwidth(0)).unwrap();
    assert!((fit.coef("x").unwrap() - rep.coef("x").unwrap()).abs() < 1e-12);
}
