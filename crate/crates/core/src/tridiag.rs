//! Real symmetric tridiagonal matrices: solves, Sturm bisection and
//! inverse-iteration eigenvectors.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i+1`.
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert!(!diag.is_empty() && off.len() + 1 == diag.len(), "off-diagonal must be one shorter");
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.off[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.len();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = self.off[i];
                m[(i + 1, i)] = self.off[i];
            }
        }
        m
    }

    /// Gershgorin bounds on the spectrum.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Solve `(T + shift·I) x = b` by Gaussian elimination with partial pivoting.
    ///
    /// Exactly zero pivots are nudged so inverse iteration at a converged
    /// eigenvalue still returns a usable direction.
    pub fn solve_shifted(&self, shift: f64, b: &[f64]) -> Vec<f64> {
        let n = self.len();
        let scale = self.spectral_bounds().1.abs().max(self.spectral_bounds().0.abs()).max(1e-300);
        let tiny = f64::EPSILON * scale;
        // rows hold (sub, diag, sup, sup2) after pivoting
        let mut d: Vec<f64> = self.diag.iter().map(|v| v + shift).collect();
        let mut du: Vec<f64> = self.off.clone();
        du.push(0.0);
        let mut dl: Vec<f64> = self.off.clone();
        let mut du2 = vec![0.0; n];
        let mut x = b.to_vec();
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let f = dl[i] / d[i];
                d[i + 1] -= f * du[i];
                x[i + 1] -= f * x[i];
                dl[i] = f;
            } else {
                let f = d[i] / dl[i];
                d[i] = dl[i];
                let tmp = d[i + 1];
                d[i + 1] = du[i] - f * tmp;
                du[i] = tmp;
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -f;
                }
                x.swap(i, i + 1);
                x[i + 1] -= f * x[i];
                dl[i] = f;
            }
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        x[n - 1] /= d[n - 1];
        if n > 1 {
            x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
        }
        x
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn sturm_count(&self, x: f64) -> usize {
        let n = self.len();
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..n {
            let denom = if q == 0.0 { f64::MIN_POSITIVE.sqrt() } else { q };
            q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / denom;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.spectral_bounds();
        let pad = 1e-12 * (lo.abs() + hi.abs()) + 1e-300;
        lo -= pad;
        hi += pad;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.sturm_count(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Eigenpairs `k = first..first+count`, ascending, with unit Euclidean
    /// eigenvectors whose largest-magnitude entry is positive.
    pub fn eigenpairs(&self, first: usize, count: usize) -> Result<Vec<(f64, Vec<f64>)>> {
        let n = self.len();
        if first + count > n {
            return Err(Error::Eigen(format!("asked for eigenpairs {first}..{} of a {n}x{n} matrix", first + count)));
        }
        let (lo, hi) = self.spectral_bounds();
        let cluster = 1e-9 * (hi - lo).abs().max(1e-300);
        let mut out: Vec<(f64, Vec<f64>)> = Vec::with_capacity(count);
        for k in first..first + count {
            let lambda = self.eigenvalue(k);
            // deterministic start vector with no special symmetry
            let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.618_033_988_7).fract()).collect();
            normalize(&mut v);
            for _ in 0..4 {
                v = self.solve_shifted(-lambda, &v);
                for (mu, prev) in out.iter() {
                    if (lambda - mu).abs() < cluster {
                        let dot: f64 = v.iter().zip(prev).map(|(a, b)| a * b).sum();
                        v.iter_mut().zip(prev).for_each(|(a, b)| *a -= dot * b);
                    }
                }
                if !normalize(&mut v) {
                    return Err(Error::Eigen(format!("inverse iteration collapsed for eigenvalue {k}")));
                }
            }
            let imax = v.iter().enumerate().fold(0, |m, (i, x)| if x.abs() > v[m].abs() { i } else { m });
            if v[imax] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            let r: f64 = self.matvec(&v).iter().zip(&v).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
            let scale = lo.abs().max(hi.abs()).max(1.0);
            if !(r <= 1e-6 * scale) {
                return Err(Error::Eigen(format!("eigenvector {k} residual {r:e}")));
            }
            out.push((lambda, v));
        }
        Ok(out)
    }
}

fn normalize(v: &mut [f64]) -> bool {
    let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(nrm.is_finite() && nrm > 0.0) {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= nrm);
    true
}
