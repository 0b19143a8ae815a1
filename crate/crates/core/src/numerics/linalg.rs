//! Tridiagonal and banded linear solvers.

use crate::error::{Error, Result};

/// Thomas algorithm; `lower[0]` and `upper[n-1]` are ignored. Overwrites `rhs` with the solution.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return Err(Error::Solver("singular tridiagonal system".into()));
    }
    rhs[0] /= beta;
    for i in 1..n {
        c[i - 1] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * c[i - 1];
        if beta == 0.0 {
            return Err(Error::Solver("singular tridiagonal system".into()));
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}

/// Banded matrix in LAPACK general-band layout, with room for pivoting fill-in.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    data: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        Self { n, kl, ku, ld, data: vec![0.0; ld * n], ipiv: vec![0; n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        (self.kl + self.ku + i - j) + self.ld * j
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        i + self.ku >= j && j + self.kl >= i
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(self.in_band(i, j));
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.idx(i, j)]
        } else {
            0.0
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            y[i] = (lo..=hi).map(|j| self.get(i, j) * x[j]).sum();
        }
    }

    /// In-place LU factorisation with partial pivoting.
    pub fn factor(&mut self) -> Result<()> {
        let (n, kl, ld) = (self.n, self.kl, self.ld);
        let kv = self.kl + self.ku;
        // fill-in rows start zeroed
        for j in 0..n {
            for r in 0..kl {
                self.data[r + ld * j] = 0.0;
            }
        }
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0;
            let mut best = self.data[kv + ld * j].abs();
            for t in 1..=km {
                let v = self.data[kv + t + ld * j].abs();
                if v > best {
                    best = v;
                    jp = t;
                }
            }
            self.ipiv[j] = j + jp;
            if best == 0.0 {
                return Err(Error::Solver(format!("singular banded matrix at column {j}")));
            }
            ju = ju.max((j + self.ku + jp).min(n - 1));
            if jp != 0 {
                for col in j..=ju {
                    let a = kv + j - col + ld * col;
                    let b = kv + j + jp - col + ld * col;
                    self.data.swap(a, b);
                }
            }
            let piv = self.data[kv + ld * j];
            for t in 1..=km {
                self.data[kv + t + ld * j] /= piv;
            }
            for col in j + 1..=ju {
                let ajc = self.data[kv + j - col + ld * col];
                if ajc != 0.0 {
                    for t in 1..=km {
                        let l = self.data[kv + t + ld * j];
                        self.data[kv + j + t - col + ld * col] -= l * ajc;
                    }
                }
            }
        }
        Ok(())
    }

    /// Solves with the factors from [`BandMatrix::factor`]; overwrites `b`.
    pub fn solve(&self, b: &mut [f64]) {
        let (n, kl, ld) = (self.n, self.kl, self.ld);
        let kv = self.kl + self.ku;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let l = self.ipiv[j];
            if l != j {
                b.swap(l, j);
            }
            let bj = b[j];
            if bj != 0.0 {
                for t in 1..=km {
                    b[j + t] -= self.data[kv + t + ld * j] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.data[kv + ld * j];
            let bj = b[j];
            if bj != 0.0 {
                for i in j.saturating_sub(kv)..j {
                    b[i] -= self.data[kv + i - j + ld * j] * bj;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    }

    #[test]
    fn tridiagonal_matches_direct() {
        let n = 6;
        let lower = vec![0.0, 1.0, -1.0, 0.5, 2.0, 1.0];
        let diag = vec![4.0, 5.0, 4.0, 6.0, 5.0, 4.0];
        let upper = vec![1.0, 0.5, 1.0, -1.0, 1.0, 0.0];
        let x: Vec<f64> = (0..n).map(|i| i as f64 - 2.0).collect();
        let mut b: Vec<f64> = (0..n)
            .map(|i| {
                let mut v = diag[i] * x[i];
                if i > 0 {
                    v += lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    v += upper[i] * x[i + 1];
                }
                v
            })
            .collect();
        solve_tridiagonal(&lower, &diag, &upper, &mut b).unwrap();
        for i in 0..n {
            assert!((b[i] - x[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn banded_lu_needs_pivoting() {
        // zero diagonal forces row exchanges
        let (n, kl, ku) = (40, 2, 2);
        let mut seed = 7;
        let mut a = BandMatrix::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                let v = if i == j { 0.0 } else { lcg(&mut seed) + if j + 1 == i { 2.0 } else { 0.0 } };
                a.set(i, j, v);
            }
        }
        let x: Vec<f64> = (0..n).map(|_| lcg(&mut seed)).collect();
        let mut b = vec![0.0; n];
        a.matvec(&x, &mut b);
        let rhs = b.clone();
        let mut lu = a.clone();
        lu.factor().unwrap();
        lu.solve(&mut b);
        // backward stability: small residual whatever the conditioning
        let mut r = vec![0.0; n];
        a.matvec(&b, &mut r);
        for i in 0..n {
            assert!((r[i] - rhs[i]).abs() < 1e-13, "{i}: {} vs {}", r[i], rhs[i]);
        }
    }
}
