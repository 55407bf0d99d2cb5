//! Complex banded LU with partial pivoting.
//!
//! Storage follows the usual band layout with `kl` extra rows for fill-in:
//! entry `(i, j)` lives at `data[j * ld + kl + ku + i - j]`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    data: Vec<C64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        BandedMatrix {
            n,
            kl,
            ku,
            ld,
            data: vec![C64::new(0.0, 0.0); ld * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        debug_assert!(i <= j + self.kl && j <= i + self.kl + self.ku, "({i}, {j}) outside band");
        j * self.ld + self.kl + self.ku + i - j
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i <= j + self.kl && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        if self.in_band(i, j) {
            self.data[self.slot(i, j)]
        } else {
            C64::new(0.0, 0.0)
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band ({}, {})", self.kl, self.ku);
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: C64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band ({}, {})", self.kl, self.ku);
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `A x` for every column of `x`.
    pub fn mul(&self, x: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::<C64>::zeros(self.n, x.ncols());
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for i in lo..=hi {
                let a = self.data[self.slot(i, j)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..x.ncols() {
                    out[(i, c)] += a * x[(j, c)];
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Factorizes in place. Fails when a pivot falls below
    /// `pivot_tol * max|A|`.
    pub fn factor(mut self, pivot_tol: f64) -> Result<BandedLu> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let kv = kl + ku;
        let scale = self.max_abs();
        let mut piv = vec![0usize; n];
        let mut min_pivot = f64::INFINITY;
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut p = j;
            let mut best = 0.0;
            for i in j..=j + km {
                let v = self.data[self.slot(i, j)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            min_pivot = min_pivot.min(best);
            if !(best > pivot_tol * scale) || scale == 0.0 {
                return Err(Error::SingularSystem {
                    pivot: if scale > 0.0 { best / scale } else { 0.0 },
                });
            }
            piv[j] = p;
            ju = ju.max((p + ku).min(n - 1));
            if p != j {
                for c in j..=ju {
                    let (a, b) = (self.slot(j, c), self.slot(p, c));
                    self.data.swap(a, b);
                }
            }
            let inv = C64::new(1.0, 0.0) / self.data[self.slot(j, j)];
            for i in j + 1..=j + km {
                let s = self.slot(i, j);
                self.data[s] *= inv;
            }
            for c in j + 1..=ju {
                let ujc = self.data[self.slot(j, c)];
                if ujc == C64::new(0.0, 0.0) {
                    continue;
                }
                let base_l = self.slot(j, j);
                let base_c = self.slot(j, c);
                for r in 1..=km {
                    let l = self.data[base_l + r];
                    self.data[base_c + r] -= l * ujc;
                }
            }
        }
        debug_assert!(kv < self.ld);
        Ok(BandedLu {
            m: self,
            piv,
            min_pivot: min_pivot / scale,
        })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    m: BandedMatrix,
    piv: Vec<usize>,
    /// Smallest pivot relative to `max|A|`.
    pub min_pivot: f64,
}

impl BandedLu {
    /// Solves `A X = B` in place for every column of `b`.
    pub fn solve_in_place(&self, b: &mut DMatrix<C64>) {
        let n = self.m.n;
        let kl = self.m.kl;
        let kv = self.m.kl + self.m.ku;
        for c in 0..b.ncols() {
            let mut col = b.column_mut(c);
            for j in 0..n {
                let p = self.piv[j];
                if p != j {
                    col.swap_rows(j, p);
                }
                let bj = col[j];
                if bj == C64::new(0.0, 0.0) {
                    continue;
                }
                let base = self.m.slot(j, j);
                for r in 1..=kl.min(n - 1 - j) {
                    col[j + r] -= self.m.data[base + r] * bj;
                }
            }
            for j in (0..n).rev() {
                let base = self.m.slot(j, j);
                col[j] /= self.m.data[base];
                let bj = col[j];
                if bj == C64::new(0.0, 0.0) {
                    continue;
                }
                let lo = j.saturating_sub(kv);
                for i in lo..j {
                    col[i] -= self.m.data[base - (j - i)] * bj;
                }
            }
        }
    }
}
