//! Complex band matrices and their LU factorization with partial pivoting.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::C64;

/// Square matrix with `kl` sub- and `ku` super-diagonals, stored by rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<C64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandedMatrix { n, kl, ku, data: vec![C64::new(0.0, 0.0); n * (kl + ku + 1)] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0, 0);
        for i in 0..n {
            m.set(i, i, C64::new(1.0, 0.0));
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        i * (self.kl + self.ku + 1) + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        if i < self.n && j < self.n && self.in_band(i, j) {
            self.data[self.slot(i, j)]
        } else {
            C64::new(0.0, 0.0)
        }
    }

    /// Panics when `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band ({}, {})", self.kl, self.ku);
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: C64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band ({}, {})", self.kl, self.ku);
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    /// Smallest band holding every nonzero entry of `m`.
    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        let n = m.nrows();
        let (mut kl, mut ku) = (0, 0);
        for i in 0..n {
            for j in 0..n {
                if m[(i, j)] != C64::new(0.0, 0.0) {
                    if i > j {
                        kl = kl.max(i - j);
                    } else {
                        ku = ku.max(j - i);
                    }
                }
            }
        }
        let mut out = Self::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..(i + ku + 1).min(n) {
                out.set(i, j, m[(i, j)]);
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    fn cols(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn mul_vec(&self, x: &DVector<C64>) -> DVector<C64> {
        DVector::from_fn(self.n, |i, _| self.cols(i).map(|j| self.data[self.slot(i, j)] * x[j]).sum())
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.n, self.ku, self.kl);
        for i in 0..self.n {
            for j in self.cols(i) {
                out.set(j, i, self.data[self.slot(i, j)].conj());
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest entry of `M - M^*`.
    pub fn hermiticity_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in self.cols(i) {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// `(M + M^*) / 2`, with a real diagonal.
    pub fn hermitian_part(&self) -> Self {
        let k = self.kl.max(self.ku);
        let mut out = Self::zeros(self.n, k, k);
        for i in 0..self.n {
            for j in i.saturating_sub(k)..(i + k + 1).min(self.n) {
                out.set(i, j, (self.get(i, j) + self.get(j, i).conj()) * 0.5);
            }
            let d = out.get(i, i);
            out.set(i, i, C64::new(d.re, 0.0));
        }
        out
    }

    /// `a I + b M` with the band of `M`.
    pub fn shifted(&self, a: C64, b: C64) -> Self {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v *= b;
        }
        for i in 0..self.n {
            out.add(i, i, a);
        }
        out
    }

    pub fn lu(&self) -> Result<BandedLu> {
        BandedLu::factor(self)
    }
}

/// `P A = L U` for a band matrix; the upper factor has bandwidth `kl + ku`.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    width: usize,
    data: Vec<C64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    pub fn factor(a: &BandedMatrix) -> Result<Self> {
        let (n, kl, ku) = (a.n, a.kl, a.ku);
        let width = 2 * kl + ku + 1;
        let mut lu = BandedLu { n, kl, width, data: vec![C64::new(0.0, 0.0); n * width], pivots: vec![0; n] };
        for i in 0..n {
            for j in a.cols(i) {
                let s = lu.idx(i, j);
                lu.data[s] = a.get(i, j);
            }
        }
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.data[lu.idx(k, k)].norm();
            for i in k + 1..=last_row {
                let v = lu.data[lu.idx(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= 1e-14 * scale {
                return Err(Error::Solver(format!(
                    "band matrix is numerically singular at pivot {k} (|pivot| = {best:e}, scale {scale:e})"
                )));
            }
            lu.pivots[k] = p;
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let (a_, b_) = (lu.idx(k, j), lu.idx(p, j));
                    lu.data.swap(a_, b_);
                }
            }
            let pivot = lu.data[lu.idx(k, k)];
            for i in k + 1..=last_row {
                let li = lu.idx(i, k);
                let l = lu.data[li] / pivot;
                lu.data[li] = l;
                if l == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in k + 1..=last_col {
                    let u = lu.data[lu.idx(k, j)];
                    let t = lu.idx(i, j);
                    lu.data[t] -= l * u;
                }
            }
        }
        Ok(lu)
    }

    pub fn solve(&self, b: &DVector<C64>) -> DVector<C64> {
        let (n, kl) = (self.n, self.kl);
        let mut x = b.clone();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap_rows(k, p);
            }
            let xk = x[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                x[i] -= self.data[self.idx(i, k)] * xk;
            }
        }
        let upper = self.width - kl - 1;
        for k in (0..n).rev() {
            let mut acc = x[k];
            for j in k + 1..=(k + upper).min(n - 1) {
                acc -= self.data[self.idx(k, j)] * x[j];
            }
            x[k] = acc / self.data[self.idx(k, k)];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::MaxNorm;

    fn sample(n: usize, kl: usize, ku: usize) -> BandedMatrix {
        let mut m = BandedMatrix::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..(i + ku + 1).min(n) {
                let v = ((i * 7 + j * 13) % 11) as f64 - 5.0;
                m.set(i, j, C64::new(v, 0.3 * (i as f64 - j as f64)));
            }
        }
        m
    }

    #[test]
    fn lu_solves_against_dense_oracle() {
        for (kl, ku) in [(1, 1), (3, 3), (2, 0), (0, 2)] {
            let m = sample(17, kl, ku).shifted(C64::new(0.5, 0.0), C64::new(1.0, 0.0));
            let b = DVector::from_fn(17, |i, _| C64::new(i as f64, 1.0));
            let x = m.lu().unwrap().solve(&b);
            let oracle = m.to_dense().lu().solve(&b).unwrap();
            assert!((x - oracle).max_norm() < 1e-10);
        }
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        let mut m = BandedMatrix::zeros(4, 1, 1);
        for i in 0..3 {
            m.set(i, i + 1, C64::new(1.0, 0.0));
            m.set(i + 1, i, C64::new(1.0, 0.0));
        }
        let b = DVector::from_fn(4, |i, _| C64::new(1.0 + i as f64, 0.0));
        let x = m.lu().unwrap().solve(&b);
        assert!((m.mul_vec(&x) - b).max_norm() < 1e-14);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let m = BandedMatrix::zeros(3, 1, 1);
        assert!(matches!(m.lu(), Err(Error::Solver(_))));
    }

    #[test]
    fn dense_round_trip_and_hermitian_part() {
        let m = sample(9, 2, 1);
        let back = BandedMatrix::from_dense(&m.to_dense());
        assert_eq!(back.to_dense(), m.to_dense());
        let h = m.hermitian_part();
        assert!(h.hermiticity_residual() == 0.0);
        let oracle = (m.to_dense() + m.to_dense().adjoint()) * C64::new(0.5, 0.0);
        assert!((h.to_dense() - oracle).max_norm() < 1e-15);
    }
}
