//! Small linear-algebra kernels: banded direct solves, COCG for complex
//! symmetric systems and a compressed sparse row matrix.

use num_complex::Complex64;
use std::ops::{Add, Div, Mul, Sub};

/// Solves a tridiagonal system in place (Thomas algorithm, no pivoting).
///
/// `lower[i]` couples row `i` to `i - 1` (`lower[0]` unused), `upper[i]`
/// couples row `i` to `i + 1` (last entry unused). The system must be
/// diagonally dominant or have positive definite Hermitian part.
pub fn solve_tridiagonal<T>(lower: &[T], diag: &[T], upper: &[T], rhs: &mut [T])
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<Output = T> + Div<Output = T>,
{
    let n = diag.len();
    assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    if n == 0 {
        return;
    }
    let mut c_prime: Vec<T> = Vec::with_capacity(n);
    let mut denom = diag[0];
    c_prime.push(upper[0] / denom);
    rhs[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c_prime[i - 1];
        c_prime.push(upper[i] / denom);
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] = rhs[i] - c_prime[i] * rhs[i + 1];
    }
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from unsorted triplets; duplicate entries are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for r in 0..self.nrows {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            out[r] = acc;
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let row = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
        match row.binary_search(&c) {
            Ok(k) => self.values[self.row_ptr[r] + k],
            Err(_) => 0.0,
        }
    }

    pub fn transpose(&self) -> Self {
        let mut trip = Vec::with_capacity(self.values.len());
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                trip.push((self.col_idx[k], r, self.values[k]));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, trip)
    }

    /// `max |A - Aᵀ| / max |A|`, zero for an exactly symmetric matrix.
    pub fn symmetry_defect(&self) -> f64 {
        let t = self.transpose();
        let mut scale: f64 = 0.0;
        let mut defect: f64 = 0.0;
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                scale = scale.max(self.values[k].abs());
                defect = defect.max((self.values[k] - t.get(r, c)).abs());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            defect / scale
        }
    }

    /// Upper bound on the spectral radius (max absolute row sum).
    pub fn gershgorin_bound(&self) -> f64 {
        (0..self.nrows)
            .map(|r| self.values[self.row_ptr[r]..self.row_ptr[r + 1]].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.col_idx[k])] += self.values[k];
            }
        }
        m
    }
}

/// Outcome of an iterative solve.
#[derive(Clone, Copy, Debug)]
pub struct IterStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Conjugate orthogonal conjugate gradient for complex symmetric `A x = b`.
///
/// `apply` computes `A v`. The unconjugated bilinear form `xᵀy` replaces the
/// inner product of ordinary CG. `x` holds the initial guess on entry.
pub fn cocg<F>(apply: F, b: &[Complex64], x: &mut [Complex64], tol: f64, max_iter: usize) -> IterStats
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    let n = b.len();
    let bnorm = norm_c(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        return IterStats { iterations: 0, relative_residual: 0.0 };
    }
    let mut ax = vec![Complex64::new(0.0, 0.0); n];
    apply(x, &mut ax);
    let mut r: Vec<Complex64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut p = r.clone();
    let mut rho = dot_u(&r, &r);
    let mut q = vec![Complex64::new(0.0, 0.0); n];
    let mut rel = norm_c(&r) / bnorm;
    let mut it = 0;
    while rel > tol && it < max_iter {
        apply(&p, &mut q);
        let pq = dot_u(&p, &q);
        if pq.norm() == 0.0 {
            break;
        }
        let alpha = rho / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        let rho_new = dot_u(&r, &r);
        let beta = rho_new / rho;
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rel = norm_c(&r) / bnorm;
        it += 1;
    }
    IterStats { iterations: it, relative_residual: rel }
}

fn dot_u(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_c(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Ordinary least-squares line `y = intercept + slope * x`, with the
/// coefficient of determination.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Some((slope, intercept, r2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_matches_dense_solve() {
        let n = 7;
        let lower: Vec<f64> = (0..n).map(|i| -1.0 - 0.1 * i as f64).collect();
        let upper: Vec<f64> = (0..n).map(|i| -0.5 + 0.05 * i as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| 4.0 + i as f64).collect();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 1.0).collect();
        let mut x = b.clone();
        solve_tridiagonal(&lower, &diag, &upper, &mut x);
        for i in 0..n {
            let mut ax = diag[i] * x[i];
            if i > 0 {
                ax += lower[i] * x[i - 1];
            }
            if i + 1 < n {
                ax += upper[i] * x[i + 1];
            }
            assert!((ax - b[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn cocg_solves_shifted_laplacian() {
        let n = 50;
        let a = Complex64::new(0.0, 0.3);
        let apply = |v: &[Complex64], out: &mut [Complex64]| {
            for i in 0..n {
                let mut lap = -2.0 * v[i];
                if i > 0 {
                    lap += v[i - 1];
                }
                if i + 1 < n {
                    lap += v[i + 1];
                }
                out[i] = v[i] - a * lap;
            }
        };
        let b: Vec<Complex64> = (0..n).map(|i| Complex64::new((i as f64 * 0.3).cos(), 0.2)).collect();
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        let st = cocg(apply, &b, &mut x, 1e-13, 500);
        assert!(st.relative_residual <= 1e-13);
        let mut ax = vec![Complex64::new(0.0, 0.0); n];
        apply(&x, &mut ax);
        let err: f64 = ax.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(err < 1e-11);
    }

    #[test]
    fn csr_sums_duplicates_and_detects_asymmetry() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (0, 1, 1.0), (1, 0, 2.0), (1, 1, 3.0)]);
        assert_eq!(m.get(0, 1), 2.0);
        assert_eq!(m.symmetry_defect(), 0.0);
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 0, 2.0)]);
        assert!((m.symmetry_defect() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn line_fit_exact() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let (s, i, r2) = linear_fit(&x, &y).unwrap();
        assert!((s + 0.5).abs() < 1e-14 && (i - 2.0).abs() < 1e-13 && (r2 - 1.0).abs() < 1e-14);
    }
}
