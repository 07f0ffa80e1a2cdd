//! Banded Gaussian elimination with partial pivoting. Each factorization is
//! used for a single right-hand side (one Newton step), so elimination and
//! forward substitution run fused and no L factor is kept.
//!
//! Row i stores the absolute-column window [i − kl, i + ku + kl]; the extra
//! kl columns absorb pivoting fill-in.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandedSystem {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedSystem {
    pub fn new(n: usize, kl: usize, ku: usize) -> BandedSystem {
        let width = 2 * kl + ku + 1;
        BandedSystem { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let lo = i as isize - self.kl as isize;
        let off = j as isize - lo;
        if off >= 0 && (off as usize) < self.width && j < self.n {
            Some(i * self.width + off as usize)
        } else {
            None
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds v to entry (i, j); the entry must lie inside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) -> Result<()> {
        match self.slot(i, j) {
            Some(s) => {
                self.data[s] += v;
                Ok(())
            }
            None => Err(Error::Argument(format!(
                "entry ({i}, {j}) outside band kl = {}, ku = {}",
                self.kl, self.ku
            ))),
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) -> Result<()> {
        match self.slot(i, j) {
            Some(s) => {
                self.data[s] = v;
                Ok(())
            }
            None => Err(Error::Argument(format!("entry ({i}, {j}) outside band"))),
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let lo = (a.min(b)) as isize - self.kl as isize;
        let hi = (a.max(b) + self.ku + self.kl) as isize;
        for col in lo.max(0)..=hi.min(self.n as isize - 1) {
            let col = col as usize;
            let va = self.get(a, col);
            let vb = self.get(b, col);
            if let Some(s) = self.slot(a, col) {
                self.data[s] = vb;
            } else if vb != 0.0 {
                unreachable!("band swap moved a nonzero outside the window");
            }
            if let Some(s) = self.slot(b, col) {
                self.data[s] = va;
            } else if va != 0.0 {
                unreachable!("band swap moved a nonzero outside the window");
            }
        }
    }

    /// Solves A x = rhs in place, destroying the matrix. Errors with the
    /// offending column when a pivot underflows.
    pub fn solve(mut self, mut rhs: Vec<f64>) -> Result<Vec<f64>> {
        let n = self.n;
        if rhs.len() != n {
            return Err(Error::Argument("right-hand side length mismatch".into()));
        }
        let scale: f64 = self.data.iter().fold(0.0_f64, |m, &v| m.max(v.abs())).max(1.0);
        let tiny = scale * 1e-300_f64.max(f64::EPSILON * 1e-4);
        for j in 0..n {
            // partial pivot among rows j..j+kl
            let last = (j + self.kl).min(n - 1);
            let mut piv = j;
            let mut piv_abs = self.get(j, j).abs();
            for i in (j + 1)..=last {
                let a = self.get(i, j).abs();
                if a > piv_abs {
                    piv = i;
                    piv_abs = a;
                }
            }
            if piv_abs < tiny {
                return Err(Error::SingularSystem(j));
            }
            if piv != j {
                self.swap_rows(j, piv);
                rhs.swap(j, piv);
            }
            let pivot = self.get(j, j);
            let col_hi = (j + self.ku + self.kl).min(n - 1);
            for i in (j + 1)..=last {
                let m = self.get(i, j) / pivot;
                if m == 0.0 {
                    continue;
                }
                // zero the eliminated entry exactly so later row swaps see a
                // structurally empty subdiagonal
                let s = self.slot(i, j).expect("subdiagonal entry is in the window");
                self.data[s] = 0.0;
                for col in (j + 1)..=col_hi {
                    let upd = m * self.get(j, col);
                    if upd != 0.0 {
                        if let Some(s) = self.slot(i, col) {
                            self.data[s] -= upd;
                        }
                    }
                }
                rhs[i] -= m * rhs[j];
            }
        }
        // back substitution
        for i in (0..n).rev() {
            let hi = (i + self.ku + self.kl).min(n - 1);
            let mut acc = rhs[i];
            for j in (i + 1)..=hi {
                acc -= self.get(i, j) * rhs[j];
            }
            rhs[i] = acc / self.get(i, i);
        }
        Ok(rhs)
    }
}
