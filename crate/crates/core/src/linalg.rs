//! Banded and tridiagonal solvers used by the mixed system.

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix stored by diagonal and first off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Thomas algorithm. Stable without pivoting for the SPD matrices used here.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut denom = self.diag[0];
        for i in 0..n {
            if i > 0 {
                denom = self.diag[i] - self.off[i - 1] * c[i - 1];
            }
            if denom == 0.0 || !denom.is_finite() {
                return Err(Error::NumericalFailure(format!("zero pivot in tridiagonal solve at row {i}")));
            }
            if i + 1 < n {
                c[i] = self.off[i] / denom;
            }
            let prev = if i > 0 { self.off[i - 1] * d[i - 1] } else { 0.0 };
            d[i] = (rhs[i] - prev) / denom;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        Ok(d)
    }
}

/// LU factorization with partial pivoting of a banded matrix with `kl`
/// sub-diagonals and `ku` super-diagonals.
///
/// Row `i` keeps the window of columns `i - kl ..= i + kl + ku`; the extra
/// `kl` columns on the right hold fill-in from row interchanges.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    /// Builds the band storage from `(row, col, value)` entries and factors it.
    pub fn factor(n: usize, kl: usize, ku: usize, entries: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let width = 2 * kl + ku + 1;
        let mut lu = Self { n, kl, ku, width, band: vec![0.0; n * width], pivots: vec![0; n] };
        for (i, j, v) in entries {
            if j + kl < i || j > i + ku {
                return Err(Error::InvalidArgument(format!("entry ({i}, {j}) outside the band")));
            }
            *lu.at_mut(i, j) += v;
        }
        lu.eliminate()?;
        Ok(lu)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.band[self.idx(i, j)]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let k = self.idx(i, j);
        &mut self.band[k]
    }

    fn eliminate(&mut self) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let scale = self.band.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = self.at(k, k).abs();
            for i in k + 1..=last_row {
                let v = self.at(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= f64::EPSILON * scale * 1e-4 || !best.is_finite() {
                return Err(Error::NumericalFailure(format!("singular banded matrix at column {k}")));
            }
            self.pivots[k] = p;
            if p != k {
                for j in k..=last_col {
                    let a = self.idx(k, j);
                    let b = self.idx(p, j);
                    self.band.swap(a, b);
                }
            }
            let pivot = self.at(k, k);
            for i in k + 1..=last_row {
                let m = self.at(i, k) / pivot;
                *self.at_mut(i, k) = m;
                if m != 0.0 {
                    for j in k + 1..=last_col {
                        let u = self.at(k, j);
                        *self.at_mut(i, j) -= m * u;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut x = rhs.to_vec();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                x[i] -= self.at(i, k) * xk;
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + kl + ku).min(n - 1) {
                s -= self.at(k, j) * x[j];
            }
            x[k] = s / self.at(k, k);
        }
        x
    }
}
