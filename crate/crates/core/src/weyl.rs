//! Weyl-ordered monomials `T_{m,n}` and the algebra they span.
//!
//! `T_{m,n}` is the operator image of `q^m p^n` under the Weyl rule, i.e. the
//! average over all orderings of `m` copies of `q` and `n` copies of `p`.
//! Products of monomials are not monomials; they expand as
//!
//! ```text
//! T_{m,n} T_{m',n'} = sum_{r,s} d_{r,s} T_{m+m'-r-s, n+n'-r-s}
//! d_{r,s} = (-1)^r (i hbar/2)^(r+s) m! n! / ((m-s)! (n-r)!) C(m',r) C(n',s)
//! ```
//!
//! with `0 <= s <= min(m, n')` and `0 <= r <= min(n, m')`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::half::HalfInt;
use crate::moments::MomentTable;
use crate::{C64, MAX_DEGREE};

/// Label `(m, n)` of `T_{m,n}`, or of the classical monomial `q^m p^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MonomialIndex {
    pub m: u32,
    pub n: u32,
}

impl MonomialIndex {
    pub const ONE: MonomialIndex = MonomialIndex { m: 0, n: 0 };

    pub const fn new(m: u32, n: u32) -> Self {
        MonomialIndex { m, n }
    }

    pub const fn degree(self) -> u32 {
        self.m + self.n
    }

    /// All indices with `m + n <= max_degree`, by degree then by `n`.
    pub fn up_to_degree(max_degree: u32) -> impl Iterator<Item = MonomialIndex> {
        (0..=max_degree).flat_map(|d| (0..=d).map(move |n| MonomialIndex::new(d - n, n)))
    }
}

impl fmt::Display for MonomialIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.m, self.n)
    }
}

fn falling(x: u32, k: u32) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (x - i) as u128)
}

fn binomial(n: u32, k: u32) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    // exact at every step: the running value is C(n-k+i+1, i+1)
    (0..k).fold(1u128, |acc, i| {
        acc * (n - k + i + 1) as u128 / (i + 1) as u128
    })
}

pub(crate) fn binomial_f64(n: u32, k: u32) -> f64 {
    binomial(n, k) as f64
}

fn check_hbar(hbar: f64) -> Result<()> {
    if hbar.is_finite() && hbar >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidHbar(hbar))
    }
}

/// Expansion of `T_a T_b` as `(index, coefficient)` pairs, highest degree
/// first. Coefficients are exact up to the final conversion to floating point.
pub fn monomial_product(
    a: MonomialIndex,
    b: MonomialIndex,
    hbar: f64,
) -> Result<Vec<(MonomialIndex, C64)>> {
    check_hbar(hbar)?;
    for d in [a.degree(), b.degree()] {
        if d > MAX_DEGREE {
            return Err(Error::DegreeTooHigh(d));
        }
    }
    let (m, n, mp, np) = (a.m, a.n, b.m, b.n);
    let half = C64::new(0.0, hbar / 2.0);
    let mut out = Vec::new();
    for k in 0..=(m.min(np) + n.min(mp)) {
        let pow = half.powu(k);
        for s in 0..=m.min(np) {
            let Some(r) = k.checked_sub(s) else { continue };
            if r > n.min(mp) {
                continue;
            }
            let magnitude =
                (falling(m, s) * falling(n, r)) as f64 * (binomial(mp, r) * binomial(np, s)) as f64;
            let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
            let coeff = pow * (sign * magnitude);
            out.push((MonomialIndex::new(m + mp - k, n + np - k), coeff));
        }
    }
    Ok(out)
}

/// Finite complex linear combination of Weyl monomials at a fixed `hbar`.
///
/// Stored in canonical sparse form: coefficients below `1e-15` times the
/// largest magnitude are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylPolynomial {
    terms: BTreeMap<MonomialIndex, C64>,
    hbar: f64,
}

const DROP_REL: f64 = 1e-15;

impl WeylPolynomial {
    pub fn zero(hbar: f64) -> Self {
        WeylPolynomial {
            terms: BTreeMap::new(),
            hbar,
        }
    }

    pub fn monomial(m: u32, n: u32, hbar: f64) -> Self {
        Self::from_terms(hbar, [(MonomialIndex::new(m, n), C64::new(1.0, 0.0))])
    }

    pub fn constant(c: C64, hbar: f64) -> Self {
        Self::from_terms(hbar, [(MonomialIndex::ONE, c)])
    }

    /// Builds a polynomial, summing repeated indices.
    pub fn from_terms(hbar: f64, terms: impl IntoIterator<Item = (MonomialIndex, C64)>) -> Self {
        let mut map = BTreeMap::new();
        for (idx, c) in terms {
            *map.entry(idx).or_insert(C64::new(0.0, 0.0)) += c;
        }
        let mut p = WeylPolynomial { terms: map, hbar };
        p.canonicalize();
        p
    }

    fn canonicalize(&mut self) {
        let max = self.terms.values().fold(0.0f64, |acc, c| acc.max(c.norm()));
        let cut = DROP_REL * max;
        self.terms
            .retain(|_, c| c.norm() > cut && *c != C64::new(0.0, 0.0));
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn terms(&self) -> impl Iterator<Item = (MonomialIndex, C64)> + '_ {
        self.terms.iter().map(|(k, v)| (*k, *v))
    }

    pub fn coeff(&self, m: u32, n: u32) -> C64 {
        self.terms
            .get(&MonomialIndex::new(m, n))
            .copied()
            .unwrap_or_default()
    }

    /// Number of nonzero terms.
    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Highest total degree present, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|k| k.degree()).max()
    }

    /// Every `T_{m,n}` is hermitian, so a polynomial is hermitian exactly
    /// when its coefficients are real.
    pub fn is_hermitian(&self) -> bool {
        self.terms.values().all(|c| c.im == 0.0)
    }

    /// Termwise complex conjugate; this is the operator adjoint.
    pub fn conj(&self) -> Self {
        WeylPolynomial {
            terms: self.terms.iter().map(|(k, c)| (*k, c.conj())).collect(),
            hbar: self.hbar,
        }
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self::from_terms(self.hbar, self.terms().map(|(k, c)| (k, c * factor)))
    }

    fn same_hbar(&self, other: &Self) -> Result<()> {
        if self.hbar == other.hbar {
            Ok(())
        } else {
            Err(Error::HbarMismatch(self.hbar, other.hbar))
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_hbar(other)?;
        Ok(Self::from_terms(
            self.hbar,
            self.terms().chain(other.terms()),
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_hbar(other)?;
        Ok(Self::from_terms(
            self.hbar,
            self.terms().chain(other.terms().map(|(k, c)| (k, -c))),
        ))
    }

    /// Expectation value `sum c_{mn} <T_{m,n}>` against a table of Wigner
    /// moments.
    pub fn expectation(&self, table: &MomentTable) -> Result<C64> {
        if self.hbar != table.hbar() {
            return Err(Error::HbarMismatch(self.hbar, table.hbar()));
        }
        self.terms().try_fold(C64::new(0.0, 0.0), |acc, (idx, c)| {
            let v = table.get(idx.m, idx.n).ok_or(Error::MissingMoment(idx))?;
            Ok(acc + c * v)
        })
    }
}

/// Product of two polynomials, bilinear in the monomial expansion.
pub fn weyl_product(p: &WeylPolynomial, q: &WeylPolynomial) -> Result<WeylPolynomial> {
    p.same_hbar(q)?;
    let mut out = Vec::new();
    for (a, ca) in p.terms() {
        for (b, cb) in q.terms() {
            for (idx, d) in monomial_product(a, b, p.hbar)? {
                out.push((idx, ca * cb * d));
            }
        }
    }
    Ok(WeylPolynomial::from_terms(p.hbar, out))
}

/// `[P, Q] = PQ - QP`.
pub fn commutator(p: &WeylPolynomial, q: &WeylPolynomial) -> Result<WeylPolynomial> {
    weyl_product(p, q)?.sub(&weyl_product(q, p)?)
}

fn write_real(f: &mut fmt::Formatter<'_>, x: f64) -> fmt::Result {
    write!(f, "{}", x)
}

/// Renders like `T[2,1] + 1i*T[1,0]`, highest degree first.
impl fmt::Display for WeylPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut keys: Vec<_> = self.terms.keys().copied().collect();
        keys.sort_by(|a, b| b.degree().cmp(&a.degree()).then(b.m.cmp(&a.m)));
        for (i, idx) in keys.iter().enumerate() {
            let c = self.terms[idx];
            // pull a leading minus out of purely real or purely imaginary coefficients
            let negative = (c.im == 0.0 && c.re < 0.0) || (c.re == 0.0 && c.im < 0.0);
            let c = if negative { -c } else { c };
            match (i, negative) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            if c.im == 0.0 {
                if c.re != 1.0 {
                    write_real(f, c.re)?;
                    f.write_str("*")?;
                }
            } else if c.re == 0.0 {
                write_real(f, c.im)?;
                f.write_str("i*")?;
            } else {
                let sign = if c.im < 0.0 { "-" } else { "+" };
                write!(f, "({}{}{}i)*", c.re, sign, c.im.abs())?;
            }
            write!(f, "T[{},{}]", idx.m, idx.n)?;
        }
        Ok(())
    }
}

/// The grand column `xi_J` of Weyl monomials `xi_{js} = T_{j-s, j+s}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XiVector {
    top: HalfInt,
    entries: Vec<MonomialIndex>,
}

impl XiVector {
    pub fn top(&self) -> HalfInt {
        self.top
    }

    pub fn entries(&self) -> &[MonomialIndex] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Flat position of `(j, s)`, with both given doubled. `s2` runs over
    /// `-j2, -j2 + 2, ..., j2`.
    pub fn flat_index(j2: u32, s2: i64) -> Option<usize> {
        if s2.unsigned_abs() > j2 as u64 || (j2 as i64 + s2) % 2 != 0 {
            return None;
        }
        Some(Self::block_offset(j2) + ((s2 + j2 as i64) / 2) as usize)
    }

    /// Flat position of the first entry with spin `j2 / 2`.
    pub fn block_offset(j2: u32) -> usize {
        let j2 = j2 as usize;
        j2 * (j2 + 1) / 2
    }

    /// Inverse of [`XiVector::flat_index`]: returns `(2j, 2s)`.
    pub fn spin_labels(&self, flat: usize) -> (u32, i64) {
        let idx = self.entries[flat];
        let j2 = idx.degree();
        (j2, idx.n as i64 - idx.m as i64)
    }
}

/// Builds `xi_J`: `j` ascending over `0, 1/2, ..., J`, and within each `j`,
/// `s` ascending from `-j` to `j`.
pub fn xi_vector(top: HalfInt) -> XiVector {
    let entries = top
        .up_to()
        .flat_map(|j| {
            let j2 = j.twice();
            (0..=j2).map(move |n| MonomialIndex::new(j2 - n, n))
        })
        .collect();
    XiVector { top, entries }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(m: u32, n: u32) -> WeylPolynomial {
        WeylPolynomial::monomial(m, n, 1.0)
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn q_times_p() {
        let prod = weyl_product(&t(1, 0), &t(0, 1)).unwrap();
        assert_eq!(prod.num_terms(), 2);
        assert_eq!(prod.coeff(1, 1), c(1.0, 0.0));
        assert_eq!(prod.coeff(0, 0), c(0.0, 0.5));
    }

    #[test]
    fn q_squared_times_p() {
        let prod = weyl_product(&t(2, 0), &t(0, 1)).unwrap();
        assert_eq!(prod.num_terms(), 2);
        assert_eq!(prod.coeff(2, 1), c(1.0, 0.0));
        assert_eq!(prod.coeff(1, 0), c(0.0, 1.0));
        assert_eq!(prod.to_string(), "T[2,1] + 1i*T[1,0]");
    }

    #[test]
    fn displayed_xi1_xi_half_block() {
        // rows xi^(1) = (T20, T11, T02), columns xi^(1/2) = (T10, T01)
        let h = 1.0;
        let expect = [
            [
                vec![((3, 0), c(1.0, 0.0))],
                vec![((2, 1), c(1.0, 0.0)), ((1, 0), c(0.0, h))],
            ],
            [
                vec![((2, 1), c(1.0, 0.0)), ((1, 0), c(0.0, -h / 2.0))],
                vec![((1, 2), c(1.0, 0.0)), ((0, 1), c(0.0, h / 2.0))],
            ],
            [
                vec![((1, 2), c(1.0, 0.0)), ((0, 1), c(0.0, -h))],
                vec![((0, 3), c(1.0, 0.0))],
            ],
        ];
        let rows = [(2, 0), (1, 1), (0, 2)];
        let cols = [(1, 0), (0, 1)];
        for (ri, &(m, n)) in rows.iter().enumerate() {
            for (ci, &(mp, np)) in cols.iter().enumerate() {
                let prod = weyl_product(&t(m, n), &t(mp, np)).unwrap();
                let want = WeylPolynomial::from_terms(
                    h,
                    expect[ri][ci]
                        .iter()
                        .map(|&((a, b), z)| (MonomialIndex::new(a, b), z)),
                );
                assert_eq!(prod, want, "row {ri} col {ci}");
            }
        }
    }

    #[test]
    fn identity_element() {
        for idx in MonomialIndex::up_to_degree(6) {
            let p = t(idx.m, idx.n);
            assert_eq!(weyl_product(&p, &t(0, 0)).unwrap(), p);
            assert_eq!(weyl_product(&t(0, 0), &p).unwrap(), p);
        }
    }

    #[test]
    fn t11_squared() {
        let prod = weyl_product(&t(1, 1), &t(1, 1)).unwrap();
        assert_eq!(prod.num_terms(), 2);
        assert_eq!(prod.coeff(2, 2), c(1.0, 0.0));
        assert_eq!(prod.coeff(0, 0), c(0.25, 0.0));
    }

    #[test]
    fn canonical_commutators() {
        let qp = commutator(&t(1, 0), &t(0, 1)).unwrap();
        assert_eq!(qp, WeylPolynomial::constant(c(0.0, 1.0), 1.0));
        let sq = commutator(&t(2, 0), &t(0, 2)).unwrap();
        assert_eq!(sq, WeylPolynomial::monomial(1, 1, 1.0).scale(c(0.0, 4.0)));
    }

    #[test]
    fn hbar_scales_coefficients() {
        let prod = weyl_product(
            &WeylPolynomial::monomial(2, 0, 0.3),
            &WeylPolynomial::monomial(0, 2, 0.3),
        )
        .unwrap();
        assert!((prod.coeff(1, 1) - c(0.0, 2.0 * 0.3)).norm() < 1e-15);
        assert!((prod.coeff(0, 0) - c(-0.3 * 0.3 / 2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn mismatched_hbar_is_an_error() {
        let err = weyl_product(
            &WeylPolynomial::monomial(1, 0, 1.0),
            &WeylPolynomial::monomial(0, 1, 2.0),
        );
        assert!(matches!(err, Err(Error::HbarMismatch(..))));
    }

    #[test]
    fn degree_cap() {
        assert!(monomial_product(MonomialIndex::new(33, 0), MonomialIndex::ONE, 1.0).is_err());
        assert!(
            monomial_product(MonomialIndex::new(16, 16), MonomialIndex::new(16, 16), 1.0).is_ok()
        );
    }

    #[test]
    fn binomials_are_exact() {
        assert_eq!(binomial(32, 16), 601_080_390);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(falling(5, 2), 20);
    }

    #[test]
    fn xi_orderings() {
        let idx = |v: &[(u32, u32)]| {
            v.iter()
                .map(|&(m, n)| MonomialIndex::new(m, n))
                .collect::<Vec<_>>()
        };
        assert_eq!(
            xi_vector(HalfInt::ZERO).entries(),
            idx(&[(0, 0)]).as_slice()
        );
        assert_eq!(
            xi_vector(HalfInt::HALF).entries(),
            idx(&[(0, 0), (1, 0), (0, 1)]).as_slice()
        );
        assert_eq!(
            xi_vector(HalfInt::ONE).entries(),
            idx(&[(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]).as_slice()
        );
        for j2 in 0..8 {
            let top = HalfInt::from_twice(j2);
            let xi = xi_vector(top);
            let jj = j2 as usize;
            assert_eq!(xi.len(), (jj + 2) * (jj + 1) / 2);
            for (flat, &e) in xi.entries().iter().enumerate() {
                let (j, s) = xi.spin_labels(flat);
                assert_eq!(XiVector::flat_index(j, s), Some(flat));
                assert_eq!(
                    e,
                    MonomialIndex::new(((j as i64 - s) / 2) as u32, ((j as i64 + s) / 2) as u32)
                );
            }
        }
    }

    #[test]
    fn display_forms() {
        let p = WeylPolynomial::from_terms(
            1.0,
            [
                (MonomialIndex::new(2, 2), c(1.0, 0.0)),
                (MonomialIndex::new(1, 1), c(0.0, -2.0)),
                (MonomialIndex::new(0, 0), c(-0.5, 0.0)),
                (MonomialIndex::new(1, 0), c(1.0, 1.0)),
            ],
        );
        assert_eq!(
            p.to_string(),
            "T[2,2] - 2i*T[1,1] + (1+1i)*T[1,0] - 0.5*T[0,0]"
        );
        assert_eq!(WeylPolynomial::zero(1.0).to_string(), "0");
    }
}
