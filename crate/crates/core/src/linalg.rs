//! Minimal symmetric-matrix and vector helpers for state dimensions 1 and 2.
//!
//! The state dimension is capped at two, so hand-rolled closed forms beat a
//! general linear-algebra dependency: eigenvalues, inverses and products are
//! all explicit.

use serde::{Deserialize, Serialize};

/// Symmetric d x d matrix, d in {1, 2}, stored as (a11, a12, a22).
/// For d = 1 only `a11` is meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymMat {
    pub dim: usize,
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl SymMat {
    pub fn scalar(a: f64) -> Self {
        SymMat { dim: 1, a11: a, a12: 0.0, a22: 0.0 }
    }

    pub fn diag2(a11: f64, a22: f64) -> Self {
        SymMat { dim: 2, a11, a12: 0.0, a22 }
    }

    pub fn new2(a11: f64, a12: f64, a22: f64) -> Self {
        SymMat { dim: 2, a11, a12, a22 }
    }

    /// Identity scaled by `c`.
    pub fn scaled_identity(dim: usize, c: f64) -> Self {
        match dim {
            1 => SymMat::scalar(c),
            2 => SymMat::diag2(c, c),
            d => panic!("unsupported dimension {d}"),
        }
    }

    pub fn zero(dim: usize) -> Self {
        SymMat::scaled_identity(dim, 0.0)
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match (i, j) {
            (0, 0) => self.a11,
            (0, 1) | (1, 0) => self.a12,
            (1, 1) => self.a22,
            _ => panic!("index out of range"),
        }
    }

    pub fn diag_entry(&self, k: usize) -> f64 {
        if k == 0 {
            self.a11
        } else {
            self.a22
        }
    }

    /// Matrix square A * A (symmetric since A is).
    pub fn square(&self) -> SymMat {
        if self.dim == 1 {
            SymMat::scalar(self.a11 * self.a11)
        } else {
            SymMat {
                dim: 2,
                a11: self.a11 * self.a11 + self.a12 * self.a12,
                a12: self.a12 * (self.a11 + self.a22),
                a22: self.a22 * self.a22 + self.a12 * self.a12,
            }
        }
    }

    /// A * x without allocating; only the first `dim` lanes are meaningful.
    pub fn mul_vec2(&self, x: [f64; 2]) -> [f64; 2] {
        if self.dim == 1 {
            [self.a11 * x[0], 0.0]
        } else {
            [
                self.a11 * x[0] + self.a12 * x[1],
                self.a12 * x[0] + self.a22 * x[1],
            ]
        }
    }

    /// Solve A y = x into a fixed array. Returns None when |det| is not
    /// safely positive.
    pub fn solve2(&self, x: [f64; 2], det_floor: f64) -> Option<[f64; 2]> {
        if self.dim == 1 {
            if self.a11.abs() <= det_floor {
                return None;
            }
            Some([x[0] / self.a11, 0.0])
        } else {
            let det = self.a11 * self.a22 - self.a12 * self.a12;
            if det.abs() <= det_floor {
                return None;
            }
            Some([
                (self.a22 * x[0] - self.a12 * x[1]) / det,
                (-self.a12 * x[0] + self.a11 * x[1]) / det,
            ])
        }
    }

    /// A * x for a d-vector x.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        if self.dim == 1 {
            vec![self.a11 * x[0]]
        } else {
            vec![
                self.a11 * x[0] + self.a12 * x[1],
                self.a12 * x[0] + self.a22 * x[1],
            ]
        }
    }

    /// Frobenius inner product A : B = trace(A * B).
    pub fn trace_product(&self, other: &SymMat) -> f64 {
        if self.dim == 1 {
            self.a11 * other.a11
        } else {
            self.a11 * other.a11 + 2.0 * self.a12 * other.a12 + self.a22 * other.a22
        }
    }

    pub fn trace(&self) -> f64 {
        if self.dim == 1 {
            self.a11
        } else {
            self.a11 + self.a22
        }
    }

    pub fn max_abs_entry(&self) -> f64 {
        if self.dim == 1 {
            self.a11.abs()
        } else {
            self.a11.abs().max(self.a12.abs()).max(self.a22.abs())
        }
    }

    /// Largest eigenvalue (closed form).
    pub fn eigen_max(&self) -> f64 {
        if self.dim == 1 {
            self.a11
        } else {
            let half_tr = 0.5 * (self.a11 + self.a22);
            let det = self.a11 * self.a22 - self.a12 * self.a12;
            half_tr + (half_tr * half_tr - det).max(0.0).sqrt()
        }
    }

    /// Smallest eigenvalue (closed form).
    pub fn eigen_min(&self) -> f64 {
        if self.dim == 1 {
            self.a11
        } else {
            let half_tr = 0.5 * (self.a11 + self.a22);
            let det = self.a11 * self.a22 - self.a12 * self.a12;
            half_tr - (half_tr * half_tr - det).max(0.0).sqrt()
        }
    }

    /// Solve A y = x. Returns None when |det| is not safely positive.
    pub fn solve(&self, x: &[f64], det_floor: f64) -> Option<Vec<f64>> {
        if self.dim == 1 {
            if self.a11.abs() <= det_floor {
                return None;
            }
            Some(vec![x[0] / self.a11])
        } else {
            let det = self.a11 * self.a22 - self.a12 * self.a12;
            if det.abs() <= det_floor {
                return None;
            }
            Some(vec![
                (self.a22 * x[0] - self.a12 * x[1]) / det,
                (-self.a12 * x[0] + self.a11 * x[1]) / det,
            ])
        }
    }

    pub fn add(&self, other: &SymMat) -> SymMat {
        SymMat {
            dim: self.dim,
            a11: self.a11 + other.a11,
            a12: self.a12 + other.a12,
            a22: self.a22 + other.a22,
        }
    }

    pub fn sub(&self, other: &SymMat) -> SymMat {
        SymMat {
            dim: self.dim,
            a11: self.a11 - other.a11,
            a12: self.a12 - other.a12,
            a22: self.a22 - other.a22,
        }
    }

    /// Whether the matrix is positive semi-definite within `tol`.
    pub fn is_psd(&self, tol: f64) -> bool {
        self.eigen_min() >= -tol
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}
