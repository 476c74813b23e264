//! Dense symmetric kernels for the small normal-equation systems used here.

use alloc::vec;
use alloc::vec::Vec;

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Mat { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for l in 0..n {
                let a = self[(i, l)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * other[(l, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| (0..self.n).map(|j| self[(i, j)] * v[j]).sum()).collect()
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    /// Replaces the matrix with (A + Aᵀ)/2.
    pub fn symmetrize(&mut self) {
        for i in 0..self.n {
            for j in 0..i {
                let m = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = m;
                self[(j, i)] = m;
            }
        }
    }

    pub fn submatrix(&self, keep: &[usize]) -> Mat {
        let mut out = Mat::zeros(keep.len());
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                out[(a, b)] = self[(i, j)];
            }
        }
        out
    }
}

impl core::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// LDLᵀ factorization of a positive definite matrix. Avoiding square
/// roots keeps one-column problems exact: β = xᵀy / xᵀx.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Mat,
    d: Vec<f64>,
}

impl Cholesky {
    pub fn new(a: &Mat) -> Option<Self> {
        let n = a.n;
        let mut l = Mat::identity(n);
        let mut d = vec![0.0; n];
        for j in 0..n {
            let mut dj = a[(j, j)];
            for k in 0..j {
                dj -= l[(j, k)] * l[(j, k)] * d[k];
            }
            if !(dj > 0.0) {
                return None;
            }
            d[j] = dj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)] * d[k];
                }
                l[(i, j)] = s / dj;
            }
        }
        Some(Cholesky { l, d })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.n;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[(i, k)] * y[k];
            }
        }
        for i in 0..n {
            y[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= self.l[(k, i)] * y[k];
            }
        }
        y
    }

    pub fn inverse(&self) -> Mat {
        let n = self.l.n;
        let mut inv = Mat::zeros(n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv.symmetrize();
        inv
    }
}

/// Walks the columns of a Gram matrix in order and keeps those that are not
/// (numerically) spanned by the ones already kept. A column is dropped when
/// its squared residual norm falls below `tol` times `reference[j]`.
pub fn independent_columns(gram: &Mat, reference: &[f64], tol: f64) -> Vec<usize> {
    let n = gram.n;
    let mut kept: Vec<usize> = Vec::new();
    // rows of the partial Cholesky factor for kept columns, indexed by kept order
    let mut l: Vec<Vec<f64>> = Vec::new();
    for j in 0..n {
        let mut row = Vec::with_capacity(kept.len());
        for (a, &i) in kept.iter().enumerate() {
            let mut s = gram[(j, i)];
            for k in 0..a {
                s -= row[k] * l[a][k];
            }
            row.push(s / l[a][a]);
        }
        let d = gram[(j, j)] - row.iter().map(|x| x * x).sum::<f64>();
        let r = reference[j].max(gram[(j, j)]);
        if d > tol * r && d > f64::MIN_POSITIVE {
            row.push(libm::sqrt(d));
            l.push(row);
            kept.push(j);
        }
    }
    kept
}

/// Smallest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
pub fn min_eigenvalue(a: &Mat) -> f64 {
    let n = a.n;
    if n == 0 {
        return 0.0;
    }
    let mut m = a.clone();
    for _ in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..i {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    (0..n).map(|i| m[(i, i)]).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_inverse_roundtrip() {
        let mut a = Mat::zeros(3);
        a.data = vec![4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0];
        let inv = Cholesky::new(&a).unwrap().inverse();
        let p = a.mul(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((p[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn drops_collinear_column() {
        // columns: x, 2x, z
        let x = [1.0, 2.0, 3.0, 4.0];
        let z = [1.0, 0.0, 1.0, 0.0];
        let cols = [x.to_vec(), x.iter().map(|v| 2.0 * v).collect(), z.to_vec()];
        let mut g = Mat::zeros(3);
        for i in 0..3 {
            for j in 0..3 {
                g[(i, j)] = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
            }
        }
        let refs: Vec<f64> = (0..3).map(|i| g[(i, i)]).collect();
        assert_eq!(independent_columns(&g, &refs, 1e-10), [0, 2]);
    }

    #[test]
    fn jacobi_min_eigen() {
        let mut a = Mat::zeros(2);
        a.data = vec![2.0, 1.0, 1.0, 2.0];
        assert!((min_eigenvalue(&a) - 1.0).abs() < 1e-12);
    }
}
