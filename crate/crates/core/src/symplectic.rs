//! Linear canonical transformations and their spin-`j` representations.
//!
//! `S` acts on the column `(q, p)^T` as `(q, p)^T -> S (q, p)^T`. The
//! homogeneous monomials `q^{j-s} p^{j+s}` of degree `2j` then mix among
//! themselves through a `(2j+1) x (2j+1)` matrix `K^(j)(S)`, and the moment
//! matrix transforms as `M_J -> K_J(S) M_J K_J(S)^T`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::half::HalfInt;
use crate::moments::MomentTable;
use crate::weyl::{binomial_f64, MonomialIndex};

const DET_TOL: f64 = 1e-12;

/// A real 2x2 matrix with unit determinant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymplecticMap {
    entries: [[f64; 2]; 2],
}

impl SymplecticMap {
    /// Accepts `[[a, b], [c, d]]` with `|ad - bc - 1| <= 1e-12`.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let det = a * d - b * c;
        if !det.is_finite() || (det - 1.0).abs() > DET_TOL {
            return Err(Error::NotSymplectic(det));
        }
        Ok(SymplecticMap {
            entries: [[a, b], [c, d]],
        })
    }

    /// Rescales an invertible matrix with positive determinant onto
    /// `SL(2, R)`. Never applied implicitly.
    pub fn normalized(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let det = a * d - b * c;
        if !(det.is_finite() && det > 0.0) {
            return Err(Error::NotSymplectic(det));
        }
        let k = det.sqrt().recip();
        Ok(SymplecticMap {
            entries: [[a * k, b * k], [c * k, d * k]],
        })
    }

    pub fn identity() -> Self {
        SymplecticMap {
            entries: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    /// Phase-space rotation by `theta`.
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        SymplecticMap {
            entries: [[c, -s], [s, c]],
        }
    }

    /// `diag(lambda, 1/lambda)`.
    pub fn squeeze(lambda: f64) -> Result<Self> {
        Self::new(lambda, 0.0, 0.0, lambda.recip())
    }

    pub fn entries(&self) -> [[f64; 2]; 2] {
        self.entries
    }

    pub fn det(&self) -> f64 {
        let [[a, b], [c, d]] = self.entries;
        a * d - b * c
    }

    pub fn compose(&self, other: &SymplecticMap) -> SymplecticMap {
        let m = self.as_matrix() * other.as_matrix();
        SymplecticMap {
            entries: [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]],
        }
    }

    pub fn as_matrix(&self) -> Matrix2<f64> {
        let [[a, b], [c, d]] = self.entries;
        Matrix2::new(a, b, c, d)
    }
}

/// `K^(j)(S)` on the basis `q^{j-s} p^{j+s}`, `s` ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinRepMatrix {
    pub j: HalfInt,
    pub entries: DMatrix<f64>,
}

/// Coefficients of `(x q + y p)^k`, indexed by the power of `p`.
fn linear_power(x: f64, y: f64, k: u32) -> Vec<f64> {
    (0..=k)
        .map(|i| binomial_f64(k, i) * x.powi((k - i) as i32) * y.powi(i as i32))
        .collect()
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (k, y) in b.iter().enumerate() {
            out[i + k] += x * y;
        }
    }
    out
}

/// Spin-`j` representation: row `n` holds the expansion of
/// `(S11 q + S12 p)^{2j-n} (S21 q + S22 p)^n` in the monomials
/// `q^{2j-n'} p^{n'}`.
pub fn spin_rep(s: &SymplecticMap, j: HalfInt) -> SpinRepMatrix {
    let [[a, b], [c, d]] = s.entries;
    let deg = j.twice();
    let size = deg as usize + 1;
    let mut k = DMatrix::zeros(size, size);
    for n in 0..=deg {
        let row = convolve(&linear_power(a, b, deg - n), &linear_power(c, d, n));
        for (col, v) in row.into_iter().enumerate() {
            k[(n as usize, col)] = v;
        }
    }
    SpinRepMatrix { j, entries: k }
}

/// Block-diagonal `K_J(S) = diag(K^(0), K^(1/2), ..., K^(J))`.
pub fn block_rep(s: &SymplecticMap, top: HalfInt) -> DMatrix<f64> {
    let j2 = top.twice() as usize;
    let dim = (j2 + 1) * (j2 + 2) / 2;
    let mut out = DMatrix::zeros(dim, dim);
    let mut offset = 0;
    for j in top.up_to() {
        let block = spin_rep(s, j).entries;
        let w = block.nrows();
        out.view_mut((offset, offset), (w, w)).copy_from(&block);
        offset += w;
    }
    out
}

/// Moments of the transformed state: each degree-`2j` block of the table is
/// multiplied by `K^(j)(S)`. Order and normalization are preserved.
pub fn transform_moments(table: &MomentTable, s: &SymplecticMap) -> Result<MomentTable> {
    let mut out = BTreeMap::new();
    for deg in 0..=table.max_order() {
        let k = spin_rep(s, HalfInt::from_twice(deg)).entries;
        let v: Vec<f64> = (0..=deg)
            .map(|n| {
                let idx = MonomialIndex::new(deg - n, n);
                table.get(idx.m, idx.n).ok_or(Error::MissingMoment(idx))
            })
            .collect::<Result<_>>()?;
        for n in 0..=deg {
            let row = k.row(n as usize);
            let val: f64 = row.iter().zip(&v).map(|(x, y)| x * y).sum();
            out.insert(MonomialIndex::new(deg - n, n), val);
        }
    }
    Ok(MomentTable::new(table.hbar(), table.max_order(), out))
}
