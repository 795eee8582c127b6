//! Exact integer form of the truncated ladder algebra.
//!
//! With `D = diag(sqrt(k!))`, the similarity transform `D a D^-1` has unit
//! superdiagonal and `D a^dagger D^-1` has subdiagonal `k + 1`. So
//!
//! ```text
//! q = sqrt(hbar/2) D^-1 Q D,   Q = a~ + a~^dagger
//! p = i sqrt(hbar/2) D^-1 P D, P = a~^dagger - a~
//! ```
//!
//! with `Q`, `P` integer matrices, and every word sum `W_{m,n}` over
//! orderings is an integer matrix with
//! `T_{m,n} = (hbar/2)^{(m+n)/2} i^n D^-1 W_{m,n} D / C(m+n, m)`.
//! Products and linear combinations survive the similarity transform, so
//! the product expansion can be checked with no round-off at all.

use crate::error::{Error, Result};
use crate::weyl::{monomial_product, MonomialIndex};
use crate::C64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct IntMatrix {
    n: usize,
    data: Vec<i128>,
}

impl IntMatrix {
    fn zeros(n: usize) -> Self {
        IntMatrix {
            n,
            data: vec![0; n * n],
        }
    }

    fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for k in 0..n {
            m.data[k * n + k] = 1;
        }
        m
    }

    fn at(&self, i: usize, j: usize) -> i128 {
        self.data[i * self.n + j]
    }

    /// `L X` for the tridiagonal generator `L` with superdiagonal `upper`
    /// and subdiagonal entries `(k + 1) * lower_sign` at `(k + 1, k)`.
    fn tridiagonal_times(&self, upper: i128, lower_sign: i128) -> Result<Self> {
        let n = self.n;
        let mut out = Self::zeros(n);
        for k in 0..n {
            for l in 0..n {
                let mut acc: i128 = 0;
                if k + 1 < n {
                    acc = acc
                        .checked_add(
                            upper
                                .checked_mul(self.at(k + 1, l))
                                .ok_or(Error::Overflow)?,
                        )
                        .ok_or(Error::Overflow)?;
                }
                if k > 0 {
                    let c = lower_sign * k as i128;
                    acc = acc
                        .checked_add(c.checked_mul(self.at(k - 1, l)).ok_or(Error::Overflow)?)
                        .ok_or(Error::Overflow)?;
                }
                out.data[k * n + l] = acc;
            }
        }
        Ok(out)
    }

    fn add(&self, other: &Self) -> Result<Self> {
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.checked_add(*b).ok_or(Error::Overflow))
            .collect::<Result<_>>()?;
        Ok(IntMatrix { n: self.n, data })
    }

    fn mul(&self, other: &Self) -> Result<Self> {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.at(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..n {
                    let b = other.at(k, j);
                    if b == 0 {
                        continue;
                    }
                    let v = &mut out.data[i * n + j];
                    *v = v
                        .checked_add(a.checked_mul(b).ok_or(Error::Overflow)?)
                        .ok_or(Error::Overflow)?;
                }
            }
        }
        Ok(out)
    }

    fn scale(&self, k: i128) -> Result<Self> {
        let data = self
            .data
            .iter()
            .map(|v| v.checked_mul(k).ok_or(Error::Overflow))
            .collect::<Result<_>>()?;
        Ok(IntMatrix { n: self.n, data })
    }
}

/// `Q X` with `Q = a~ + a~^dagger`.
fn q_times(x: &IntMatrix) -> Result<IntMatrix> {
    x.tridiagonal_times(1, 1)
}

/// `P X` with `P = a~^dagger - a~`.
fn p_times(x: &IntMatrix) -> Result<IntMatrix> {
    x.tridiagonal_times(-1, 1)
}

/// Integer word sums `W_{m,n}` for all `m + n <= max_degree`.
pub(crate) struct ExactWordBasis {
    dim: usize,
    max_degree: u32,
    words: Vec<IntMatrix>,
}

fn tri(idx: MonomialIndex) -> usize {
    let d = idx.degree() as usize;
    d * (d + 1) / 2 + idx.n as usize
}

impl ExactWordBasis {
    pub(crate) fn new(max_degree: u32, dim: usize) -> Result<Self> {
        let mut words: Vec<IntMatrix> = Vec::new();
        for idx in MonomialIndex::up_to_degree(max_degree) {
            let w = if idx.degree() == 0 {
                IntMatrix::identity(dim)
            } else {
                let mut acc = IntMatrix::zeros(dim);
                if idx.m > 0 {
                    acc = acc.add(&q_times(&words[tri(MonomialIndex::new(idx.m - 1, idx.n))])?)?;
                }
                if idx.n > 0 {
                    acc = acc.add(&p_times(&words[tri(MonomialIndex::new(idx.m, idx.n - 1))])?)?;
                }
                acc
            };
            words.push(w);
        }
        Ok(ExactWordBasis {
            dim,
            max_degree,
            words,
        })
    }

    pub(crate) fn word(&self, idx: MonomialIndex) -> &IntMatrix {
        assert!(idx.degree() <= self.max_degree);
        &self.words[tri(idx)]
    }
}

fn binom(n: u32, k: u32) -> i128 {
    let k = k.min(n - k);
    (0..k).fold(1i128, |acc, i| {
        acc * (n - k + i + 1) as i128 / (i + 1) as i128
    })
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// `i^k` as `(re, im)`.
fn i_pow(k: u32) -> (i128, i128) {
    match k % 4 {
        0 => (1, 0),
        1 => (0, 1),
        2 => (-1, 0),
        _ => (0, -1),
    }
}

/// `sqrt(l! / k!)`.
fn factorial_ratio_sqrt(l: usize, k: usize) -> f64 {
    let (lo, hi, invert) = if l >= k { (k, l, false) } else { (l, k, true) };
    let r = ((lo + 1)..=hi).fold(1.0f64, |acc, x| acc * (x as f64).sqrt());
    if invert {
        r.recip()
    } else {
        r
    }
}

/// Exact residual of `T_a T_b - sum d T` in the truncated space, mapped back
/// to the Fock basis at the given `hbar`. Returns the largest absolute
/// entry on the leading `corner x corner` block.
pub(crate) fn exact_product_deviation(
    basis: &ExactWordBasis,
    a: MonomialIndex,
    b: MonomialIndex,
    hbar: f64,
) -> Result<f64> {
    let expansion = monomial_product(a, b, hbar)?;
    exact_residual(basis, a, b, &expansion, hbar)
}

/// Deviation of `T_a T_b` from an arbitrary candidate expansion.
pub(crate) fn exact_residual(
    basis: &ExactWordBasis,
    a: MonomialIndex,
    b: MonomialIndex,
    expansion: &[(MonomialIndex, C64)],
    hbar: f64,
) -> Result<f64> {
    if !(hbar.is_finite() && hbar > 0.0) {
        return Err(Error::InvalidHbar(hbar));
    }
    let total = a.degree() + b.degree();
    let half = hbar / 2.0;
    let n = basis.dim;

    // normalized coefficients e_c = d_c (hbar/2)^{-k_c}; Gaussian integers
    // when the expansion is right
    let mut terms = Vec::new();
    for &(idx, d) in expansion {
        if idx.degree() > total || !(total - idx.degree()).is_multiple_of(2) {
            return Err(Error::DimensionMismatch(format!(
                "term {idx} has the wrong degree parity"
            )));
        }
        let k = (total - idx.degree()) / 2;
        let e = d / half.powi(k as i32);
        let rounded = (e.re.round(), e.im.round());
        if rounded.0.abs() > 2f64.powi(100) || rounded.1.abs() > 2f64.powi(100) {
            return Err(Error::Overflow);
        }
        terms.push((
            idx,
            (rounded.0 as i128, rounded.1 as i128),
            e - C64::new(rounded.0, rounded.1),
        ));
    }

    let (ca, cb) = (binom(a.degree(), a.m), binom(b.degree(), b.m));
    let mut denom = ca * cb;
    for (idx, _, _) in &terms {
        let c = binom(idx.degree(), idx.m);
        denom = denom / gcd(denom, c) * c;
    }

    // residual * denom, split into real and imaginary integer parts
    let mut re = IntMatrix::zeros(n);
    let mut im = IntMatrix::zeros(n);
    let accumulate = |re: &mut IntMatrix,
                      im: &mut IntMatrix,
                      m: &IntMatrix,
                      coeff: (i128, i128)|
     -> Result<()> {
        if coeff.0 != 0 {
            *re = re.add(&m.scale(coeff.0)?)?;
        }
        if coeff.1 != 0 {
            *im = im.add(&m.scale(coeff.1)?)?;
        }
        Ok(())
    };

    let lhs = basis.word(a).mul(basis.word(b))?;
    let (pr, pi) = i_pow(a.n + b.n);
    let f = denom / (ca * cb);
    accumulate(&mut re, &mut im, &lhs, (pr * f, pi * f))?;

    for (idx, e, _) in &terms {
        let (pr, pi) = i_pow(idx.n);
        // -(e * i^n) * denom / C
        let (zr, zi) = (e.0 * pr - e.1 * pi, e.0 * pi + e.1 * pr);
        let f = denom / binom(idx.degree(), idx.m);
        let coeff = (
            zr.checked_mul(-f).ok_or(Error::Overflow)?,
            zi.checked_mul(-f).ok_or(Error::Overflow)?,
        );
        accumulate(&mut re, &mut im, basis.word(*idx), coeff)?;
    }

    let corner = n.saturating_sub(total as usize);
    let prefactor = half.powf(total as f64 / 2.0);
    let mut worst = 0.0f64;
    for k in 0..corner {
        for l in 0..corner {
            let mut z = C64::new(re.at(k, l) as f64, im.at(k, l) as f64) / denom as f64;
            // rounding remainder of coefficients that were not exact integers
            for (idx, _, rem) in &terms {
                if *rem != C64::new(0.0, 0.0) {
                    let (pr, pi) = i_pow(idx.n);
                    let w = basis.word(*idx).at(k, l) as f64 / binom(idx.degree(), idx.m) as f64;
                    z -= rem * C64::new(pr as f64, pi as f64) * w;
                }
            }
            worst = worst.max(prefactor * z.norm() * factorial_ratio_sqrt(l, k));
        }
    }
    Ok(worst)
}
