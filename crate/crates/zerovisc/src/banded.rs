//! Real banded matrices with an LU factorisation (partial pivoting).
//!
//! Every wall-normal two-point problem in the crate reduces to one of these per
//! tangential mode. Right-hand sides are complex; the matrices are real.

use num_complex::Complex64;

/// Banded `n x n` matrix with `kl` sub- and `ku` super-diagonals.
///
/// Storage follows LAPACK `gbtrf`: `kl` extra rows on top for pivoting fill-in,
/// column-major band of height `2 kl + ku + 1`.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    ab: Vec<f64>,
    pivots: Vec<usize>,
    factored: bool,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> BandMatrix {
        let ld = 2 * kl + ku + 1;
        BandMatrix { n, kl, ku, ld, ab: vec![0.0; ld * n], pivots: vec![0; n], factored: false }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        // row kl + ku + i - j of column j
        j * self.ld + (self.kl + self.ku + i - j)
    }

    /// Set entry `(i, j)`; panics if it lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(!self.factored);
        assert!(j + self.kl >= i && i + self.ku >= j, "({i},{j}) outside band");
        let k = self.idx(i, j);
        self.ab[k] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(!self.factored);
        assert!(j + self.kl >= i && i + self.ku >= j, "({i},{j}) outside band");
        let k = self.idx(i, j);
        self.ab[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || i + self.ku < j {
            return 0.0;
        }
        self.ab[self.idx(i, j)]
    }

    /// Clear row `i` (used to overwrite boundary rows).
    pub fn clear_row(&mut self, i: usize) {
        let lo = i.saturating_sub(self.kl);
        let hi = (i + self.ku).min(self.n - 1);
        for j in lo..=hi {
            let k = self.idx(i, j);
            self.ab[k] = 0.0;
        }
    }

    /// `y = A x` for the unfactored matrix.
    pub fn mul(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert!(!self.factored);
        let mut y = vec![Complex64::new(0.0, 0.0); self.n];
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            for j in lo..=hi {
                *yi += x[j] * self.get(i, j);
            }
        }
        y
    }

    /// In-place LU factorisation with partial pivoting. Returns `false` if singular.
    pub fn factor(&mut self) -> bool {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let kv = kl + ku;
        let mut ok = true;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            // pivot search in column j, rows j..=j+km
            let mut p = 0;
            let mut best = self.ab[j * self.ld + kv].abs();
            for r in 1..=km {
                let v = self.ab[j * self.ld + kv + r].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            self.pivots[j] = j + p;
            if best == 0.0 {
                ok = false;
                continue;
            }
            let ju = (j + kv).min(n - 1);
            if p != 0 {
                for c in j..=ju {
                    let a = self.idx(j, c);
                    let b = self.idx(j + p, c);
                    self.ab.swap(a, b);
                }
            }
            let piv = self.ab[j * self.ld + kv];
            for r in 1..=km {
                self.ab[j * self.ld + kv + r] /= piv;
            }
            for c in j + 1..=ju {
                let ujc = self.ab[self.idx(j, c)];
                if ujc == 0.0 {
                    continue;
                }
                for r in 1..=km {
                    let l = self.ab[j * self.ld + kv + r];
                    let k = self.idx(j + r, c);
                    self.ab[k] -= l * ujc;
                }
            }
        }
        self.factored = true;
        ok
    }

    /// Solve `A x = b` in place after [`factor`](Self::factor).
    pub fn solve(&self, b: &mut [Complex64]) {
        assert!(self.factored);
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let kv = kl + ku;
        for j in 0..n {
            let p = self.pivots[j];
            if p != j {
                b.swap(j, p);
            }
            let km = kl.min(n - 1 - j);
            let bj = b[j];
            for r in 1..=km {
                b[j + r] -= bj * self.ab[j * self.ld + kv + r];
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.ab[j * self.ld + kv];
            let bj = b[j];
            let top = j.saturating_sub(kv);
            for i in top..j {
                let u = self.ab[self.idx(i, j)];
                b[i] -= bj * u;
            }
        }
    }

    /// Solve for a real right-hand side.
    pub fn solve_real(&self, b: &mut [f64]) {
        let mut c: Vec<Complex64> = b.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.solve(&mut c);
        for (o, v) in b.iter_mut().zip(c) {
            *o = v.re;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_tridiagonal_system() {
        let n = 50;
        let mut a = BandMatrix::zeros(n, 1, 1);
        for i in 0..n {
            a.set(i, i, 2.0);
            if i > 0 {
                a.set(i, i - 1, -1.0);
            }
            if i + 1 < n {
                a.set(i, i + 1, -1.0);
            }
        }
        let x: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, -(i as f64).sin())).collect();
        let mut b = a.mul(&x);
        assert!(a.factor());
        a.solve(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).norm() < 1e-10);
        }
    }

    #[test]
    fn pivots_when_leading_entry_vanishes() {
        let n = 6;
        let mut a = BandMatrix::zeros(n, 2, 2);
        for i in 0..n {
            for j in i.saturating_sub(2)..=(i + 2).min(n - 1) {
                a.set(i, j, ((i * 7 + j * 3) % 5) as f64 - 1.5);
            }
        }
        a.set(0, 0, 0.0);
        let x: Vec<Complex64> = (0..n).map(|i| Complex64::new(1.0 + i as f64, 0.5)).collect();
        let mut b = a.mul(&x);
        assert!(a.factor());
        a.solve(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).norm() < 1e-9, "{u} vs {v}");
        }
    }
}
