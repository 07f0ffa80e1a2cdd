//! Small dense symmetric matrices and a cyclic Jacobi eigensolver.
//!
//! Everything here targets the pointwise geometry (n = 2 or 3 in practice,
//! arbitrary small n in principle), so no effort is spent on blocking or
//! cache behavior.

use crate::error::{Error, Result};

/// Off-diagonal threshold at which the Jacobi sweep stops.
pub const JACOBI_TOL: f64 = 1e-13;

/// An n-by-n real symmetric matrix stored densely in row-major order.
///
/// Symmetry is maintained by construction: all mutating entry points write
/// both `(i, j)` and `(j, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m.data[i * values.len() + i] = v;
        }
        m
    }

    /// Builds from an arbitrary square array by symmetrizing: (M + Mᵀ)/2.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = 0.5 * (f(i, j) + f(j, i));
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix { n: self.n, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.n, other.n);
        SymMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.n, other.n);
        SymMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// A * B as a raw (generally nonsymmetric) row-major matrix.
    pub fn matmul_raw(&self, other: &SymMatrix) -> Vec<f64> {
        let n = self.n;
        assert_eq!(n, other.n);
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    /// Symmetric triple product Qᵀ M Q for symmetric M and a general Q
    /// (columns of `q` indexed as q[row * n + col]).
    pub fn congruence(&self, q: &[f64]) -> SymMatrix {
        let n = self.n;
        // tmp = M Q
        let mut tmp = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                for j in 0..n {
                    tmp[i * n + j] += a * q[k * n + j];
                }
            }
        }
        SymMatrix::from_fn(n, |i, j| (0..n).map(|k| q[k * n + i] * tmp[k * n + j]).sum())
    }

    /// self · inner · self; symmetric by construction, computed without
    /// symmetrizing the (non-symmetric) intermediate product.
    pub fn sandwich(&self, inner: &SymMatrix) -> SymMatrix {
        let n = self.n;
        SymMatrix::from_fn(n, |i, j| {
            let mut acc = 0.0;
            for k in 0..n {
                for l in 0..n {
                    acc += self.get(i, k) * inner.get(k, l) * self.get(l, j);
                }
            }
            acc
        })
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.data[i * self.n + i]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Frobenius-style inner product tr(A B).
    pub fn dot(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// Eigen-decomposition by cyclic Jacobi rotations.
    ///
    /// Returns `(eigenvalues, q)` with eigenvalues sorted descending and `q`
    /// row-major such that `A ≈ Q diag(λ) Qᵀ`, i.e. column `j` of `q` is the
    /// eigenvector of `λ_j`.
    pub fn eigen(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let mut a = self.data.clone();
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            q[i * n + i] = 1.0;
        }
        let scale = self.max_abs().max(1.0);
        for _sweep in 0..64 {
            let mut off = 0.0_f64;
            for p in 0..n {
                for r in p + 1..n {
                    off = off.max(a[p * n + r].abs());
                }
            }
            if off <= JACOBI_TOL * scale {
                break;
            }
            for p in 0..n {
                for r in p + 1..n {
                    let apr = a[p * n + r];
                    if apr.abs() <= JACOBI_TOL * scale {
                        continue;
                    }
                    let app = a[p * n + p];
                    let arr = a[r * n + r];
                    let theta = (arr - app) / (2.0 * apr);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akr = a[k * n + r];
                        a[k * n + p] = c * akp - s * akr;
                        a[k * n + r] = s * akp + c * akr;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let ark = a[r * n + k];
                        a[p * n + k] = c * apk - s * ark;
                        a[r * n + k] = s * apk + c * ark;
                    }
                    for k in 0..n {
                        let qkp = q[k * n + p];
                        let qkr = q[k * n + r];
                        q[k * n + p] = c * qkp - s * qkr;
                        q[k * n + r] = s * qkp + c * qkr;
                    }
                }
            }
        }
        let mut lam: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
        // sort descending, permuting eigenvector columns alongside
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| lam[j].partial_cmp(&lam[i]).unwrap());
        let lam_sorted: Vec<f64> = order.iter().map(|&i| lam[i]).collect();
        let mut q_sorted = vec![0.0; n * n];
        for (newcol, &oldcol) in order.iter().enumerate() {
            for k in 0..n {
                q_sorted[k * n + newcol] = q[k * n + oldcol];
            }
        }
        lam = lam_sorted;
        (lam, q_sorted)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigen().0
    }

    /// Determinant via the (unsorted) eigenvalues for n > 2; closed form below.
    pub fn det(&self) -> f64 {
        match self.n {
            1 => self.data[0],
            2 => self.data[0] * self.data[3] - self.data[1] * self.data[2],
            _ => self.eigenvalues().iter().product(),
        }
    }

    /// Inverse by Gauss-Jordan with partial pivoting (small n only).
    pub fn inverse(&self) -> Result<SymMatrix> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut inv = vec![0.0; n * n];
        for i in 0..n {
            inv[i * n + i] = 1.0;
        }
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if a[r * n + col].abs() > a[piv * n + col].abs() {
                    piv = r;
                }
            }
            if a[piv * n + col].abs() < 1e-300 {
                return Err(Error::SingularSystem(col));
            }
            if piv != col {
                for j in 0..n {
                    a.swap(col * n + j, piv * n + j);
                    inv.swap(col * n + j, piv * n + j);
                }
            }
            let d = a[col * n + col];
            for j in 0..n {
                a[col * n + j] /= d;
                inv[col * n + j] /= d;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[r * n + col];
                if f == 0.0 {
                    continue;
                }
                for j in 0..n {
                    a[r * n + j] -= f * a[col * n + j];
                    inv[r * n + j] -= f * inv[col * n + j];
                }
            }
        }
        Ok(SymMatrix::from_fn(n, |i, j| inv[i * n + j]))
    }

    /// Positive definiteness check via eigenvalues.
    pub fn is_positive_definite(&self, tol: f64) -> bool {
        self.eigenvalues().iter().all(|&l| l > tol)
    }
}

/// Dot product of two slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm squared.
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}
