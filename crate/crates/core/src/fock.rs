//! Brute-force reference in a truncated Fock space.
//!
//! `q = sqrt(hbar/2) (a + a^dagger)` and `p = i sqrt(hbar/2) (a^dagger - a)`
//! are built as `N x N` matrices. Weyl-ordered operators are formed by
//! literally summing every ordering of `m` copies of `q` and `n` copies of
//! `p`. Nothing here uses the product expansion from [`crate::weyl`], so the
//! two can be checked against each other.
//!
//! Truncation corrupts products near the top of the space: a word of `k`
//! ladder operators is exact only on the leading `(N - k) x (N - k)` corner.
//! Every comparison in this module is restricted to that corner.

mod exact;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::moments::FockDensityMatrix;
use crate::weyl::{binomial_f64, monomial_product, MonomialIndex};
use crate::C64;

/// Default working dimension for oracle checks up to degree 8.
pub const DEFAULT_ORACLE_DIM: usize = 60;

/// Smallest dimension accepted for a Weyl operator of the given degree.
pub const fn safe_dim(degree: u32) -> usize {
    4 * degree as usize + 10
}

/// A truncated operator together with the parameters it was built with.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedOperator {
    pub dim: usize,
    pub hbar: f64,
    pub entries: DMatrix<C64>,
}

/// Truncated `(q, p)` on `dim` Fock levels.
///
/// # Panics
///
/// If `dim < 2`.
pub fn generators(dim: usize, hbar: f64) -> (DMatrix<C64>, DMatrix<C64>) {
    assert!(dim >= 2, "need at least two Fock levels");
    let amp = (hbar / 2.0).sqrt();
    let mut q = DMatrix::zeros(dim, dim);
    let mut p = DMatrix::zeros(dim, dim);
    for k in 0..dim - 1 {
        // a_{k,k+1} = sqrt(k+1)
        let a = ((k + 1) as f64).sqrt() * amp;
        q[(k, k + 1)] = C64::new(a, 0.0);
        q[(k + 1, k)] = C64::new(a, 0.0);
        p[(k, k + 1)] = C64::new(0.0, -a);
        p[(k + 1, k)] = C64::new(0.0, a);
    }
    (q, p)
}

type WordTable = Vec<Vec<Option<DMatrix<C64>>>>;

/// `g * w` for a tridiagonal `g`, touching only its two off-diagonals.
fn tridiagonal_times(g: &DMatrix<C64>, w: &DMatrix<C64>) -> DMatrix<C64> {
    let dim = g.nrows();
    DMatrix::from_fn(dim, w.ncols(), |i, j| {
        let mut acc = C64::new(0.0, 0.0);
        if i > 0 {
            acc += g[(i, i - 1)] * w[(i - 1, j)];
        }
        if i + 1 < dim {
            acc += g[(i, i + 1)] * w[(i + 1, j)];
        }
        acc
    })
}

/// Sum over all words in `m` q's and `n` p's, for every `(m, n)` with
/// `m <= max_m`, `n <= max_n`, `m + n <= max_degree`, via
/// `W(m, n) = q W(m-1, n) + p W(m, n-1)`.
fn word_sums(
    q: &DMatrix<C64>,
    p: &DMatrix<C64>,
    max_m: u32,
    max_n: u32,
    max_degree: u32,
) -> WordTable {
    let dim = q.nrows();
    let mut w: WordTable = vec![vec![None; max_n as usize + 1]; max_m as usize + 1];
    w[0][0] = Some(DMatrix::identity(dim, dim));
    for deg in 1..=max_degree {
        for n in 0..=deg.min(max_n) {
            let m = deg - n;
            if m > max_m {
                continue;
            }
            let mut acc = DMatrix::<C64>::zeros(dim, dim);
            if m > 0 {
                acc += tridiagonal_times(q, w[m as usize - 1][n as usize].as_ref().unwrap());
            }
            if n > 0 {
                acc += tridiagonal_times(p, w[m as usize][n as usize - 1].as_ref().unwrap());
            }
            w[m as usize][n as usize] = Some(acc);
        }
    }
    w
}

fn check_dim(degree: u32, dim: usize) -> Result<()> {
    let need = safe_dim(degree);
    if dim < need {
        return Err(Error::TruncationUnsafe { dim, need });
    }
    Ok(())
}

/// `T_{m,n}` as the average of all `C(m+n, m)` orderings.
pub fn weyl_operator(m: u32, n: u32, dim: usize, hbar: f64) -> Result<TruncatedOperator> {
    check_dim(m + n, dim)?;
    let (q, p) = generators(dim, hbar);
    let mut w = word_sums(&q, &p, m, n, m + n);
    let sum = w[m as usize][n as usize].take().unwrap();
    Ok(TruncatedOperator {
        dim,
        hbar,
        entries: sum / C64::new(binomial_f64(m + n, m), 0.0),
    })
}

/// Same as [`weyl_operator`], but by explicitly listing every distinct
/// arrangement of the factors and multiplying it out.
pub fn weyl_operator_enumerated(
    m: u32,
    n: u32,
    dim: usize,
    hbar: f64,
) -> Result<TruncatedOperator> {
    check_dim(m + n, dim)?;
    let (q, p) = generators(dim, hbar);
    let words = arrangements(m, n);
    let mut sum = DMatrix::<C64>::zeros(dim, dim);
    for word in &words {
        let mut prod = DMatrix::<C64>::identity(dim, dim);
        for &is_q in word {
            prod = if is_q { &prod * &q } else { &prod * &p };
        }
        sum += prod;
    }
    Ok(TruncatedOperator {
        dim,
        hbar,
        entries: sum / C64::new(words.len() as f64, 0.0),
    })
}

/// All distinct sequences of `m` trues and `n` falses.
fn arrangements(m: u32, n: u32) -> Vec<Vec<bool>> {
    if m == 0 && n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    if m > 0 {
        for mut rest in arrangements(m - 1, n) {
            rest.insert(0, true);
            out.push(rest);
        }
    }
    if n > 0 {
        for mut rest in arrangements(m, n - 1) {
            rest.insert(0, false);
            out.push(rest);
        }
    }
    out
}

/// Largest `|entry|` of `a - b` on the leading `corner x corner` block.
pub fn corner_deviation(a: &DMatrix<C64>, b: &DMatrix<C64>, corner: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..corner {
        for j in 0..corner {
            worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    worst
}

/// Compares `T_a T_b`, computed as a product of brute-force operators,
/// against the expansion `sum d_{r,s} T_{...}` in the same truncated space.
/// Returns the largest absolute deviation on the truncation-safe corner.
///
/// The comparison runs in exact integer arithmetic (see [`ProductOracle`]),
/// so a correct expansion yields exactly zero.
pub fn oracle_product_check(
    a: MonomialIndex,
    b: MonomialIndex,
    dim: usize,
    hbar: f64,
) -> Result<f64> {
    ProductOracle::new(a.degree() + b.degree(), dim, hbar)?.check(a, b)
}

/// Exact brute-force reference for products of Weyl monomials.
///
/// Conjugating by `diag(sqrt(k!))` turns the truncated ladder operators
/// into integer matrices; word sums over orderings stay integral, so the
/// residual `T_a T_b - sum d T` is formed without round-off and only mapped
/// back to the Fock basis at the end.
pub struct ProductOracle {
    words: exact::ExactWordBasis,
    dim: usize,
    hbar: f64,
}

impl ProductOracle {
    /// Supports products whose total degree is at most `max_degree`.
    pub fn new(max_degree: u32, dim: usize, hbar: f64) -> Result<Self> {
        check_dim(max_degree, dim)?;
        Ok(ProductOracle {
            words: exact::ExactWordBasis::new(max_degree, dim)?,
            dim,
            hbar,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn check(&self, a: MonomialIndex, b: MonomialIndex) -> Result<f64> {
        exact::exact_product_deviation(&self.words, a, b, self.hbar)
    }
}

/// Floating-point variant of [`oracle_product_check`]: both sides are built
/// from `f64` operator matrices, so the result carries round-off of order
/// `eps * |T_a| |T_b|`.
pub fn oracle_product_check_float(
    a: MonomialIndex,
    b: MonomialIndex,
    dim: usize,
    hbar: f64,
) -> Result<f64> {
    let basis = WeylOperatorBasis::new(a.degree() + b.degree(), dim, hbar)?;
    oracle_product_check_with(&basis, a, b)
}

/// [`oracle_product_check_float`] against a prebuilt basis.
pub fn oracle_product_check_with(
    basis: &WeylOperatorBasis,
    a: MonomialIndex,
    b: MonomialIndex,
) -> Result<f64> {
    let dim = basis.dim();
    let lhs = basis.get(a) * basis.get(b);
    let mut rhs = DMatrix::<C64>::zeros(dim, dim);
    for (idx, d) in monomial_product(a, b, basis.hbar())? {
        rhs += basis.get(idx) * d;
    }
    let corner = dim.saturating_sub((a.degree() + b.degree()) as usize);
    Ok(corner_deviation(&lhs, &rhs, corner))
}

/// Every `T_{m,n}` with `m + n <= max_degree` on a common truncated space,
/// for repeated expectation values.
#[derive(Debug, Clone)]
pub struct WeylOperatorBasis {
    dim: usize,
    hbar: f64,
    max_degree: u32,
    ops: Vec<DMatrix<C64>>,
}

fn triangular_index(idx: MonomialIndex) -> usize {
    let d = idx.degree() as usize;
    d * (d + 1) / 2 + idx.n as usize
}

impl WeylOperatorBasis {
    pub fn new(max_degree: u32, dim: usize, hbar: f64) -> Result<Self> {
        check_dim(max_degree, dim)?;
        let (q, p) = generators(dim, hbar);
        let mut w = word_sums(&q, &p, max_degree, max_degree, max_degree);
        let ops = MonomialIndex::up_to_degree(max_degree)
            .map(|idx| {
                let sum = w[idx.m as usize][idx.n as usize].take().unwrap();
                sum / C64::new(binomial_f64(idx.degree(), idx.m), 0.0)
            })
            .collect();
        Ok(WeylOperatorBasis {
            dim,
            hbar,
            max_degree,
            ops,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    /// # Panics
    ///
    /// If `idx` is above the basis degree.
    pub fn get(&self, idx: MonomialIndex) -> &DMatrix<C64> {
        assert!(
            idx.degree() <= self.max_degree,
            "monomial {idx} above basis degree"
        );
        &self.ops[triangular_index(idx)]
    }

    /// `tr(rho T_{m,n})`, with `rho` zero-padded to the basis dimension.
    pub fn expectation(&self, rho: &FockDensityMatrix, idx: MonomialIndex) -> Result<C64> {
        let r = rho.entries();
        if r.nrows() > self.dim {
            return Err(Error::DimensionMismatch(format!(
                "state dim {} exceeds operator dim {}",
                r.nrows(),
                self.dim
            )));
        }
        let t = self.get(idx);
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..r.nrows() {
            for l in 0..r.ncols() {
                acc += r[(k, l)] * t[(l, k)];
            }
        }
        Ok(acc)
    }
}
