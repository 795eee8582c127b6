//! The moment matrix `M_J` and its positivity.
//!
//! `(M_J)_{js, j's'} = <xi_{js} xi_{j's'}>`, where each product of Weyl
//! monomials is expanded back into monomials and evaluated against a moment
//! table. For every physical state `M_J >= 0` at every `J`.
//!
//! Positivity is certified directly from the spectrum. Alongside, the matrix
//! is reduced block by block with Schur complements: pivoting on the scalar
//! block leaves the centered covariance condition at level 1, pivoting on
//! that leaves the fourth-order condition at level 2, and so on.

use nalgebra::DMatrix;
use serde_json::json;

use crate::error::{Error, Result};
use crate::half::HalfInt;
use crate::linalg::{hermiticity_defect, max_abs, min_eigenvalue};
use crate::moments::MomentTable;
use crate::weyl::{monomial_product, weyl_product, xi_vector, WeylPolynomial, XiVector};
use crate::C64;

pub const DEFAULT_PSD_TOL: f64 = 1e-9;

const HERMITIAN_TOL: f64 = 1e-10;
const SINGULAR_TOL: f64 = 1e-10;

/// Hermitian moment matrix indexed by `(j, s)` in `xi_J` order.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentMatrix {
    xi: XiVector,
    entries: DMatrix<C64>,
}

impl MomentMatrix {
    /// Wraps an arbitrary square matrix of the right order. Hermiticity is
    /// checked later, by [`check_psd`] and [`schur_reduce`].
    pub fn from_entries(top: HalfInt, entries: DMatrix<C64>) -> Result<Self> {
        let xi = xi_vector(top);
        if entries.nrows() != xi.len() || entries.ncols() != xi.len() {
            return Err(Error::DimensionMismatch(format!(
                "M_{top} must be {n}x{n}, got {}x{}",
                entries.nrows(),
                entries.ncols(),
                n = xi.len()
            )));
        }
        Ok(MomentMatrix { xi, entries })
    }

    pub fn top(&self) -> HalfInt {
        self.xi.top()
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }

    pub fn xi(&self) -> &XiVector {
        &self.xi
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<C64> {
        self.entries
    }

    /// The `(2j+1) x (2j'+1)` block `M^{j,j'}`.
    pub fn block(&self, j: HalfInt, jp: HalfInt) -> DMatrix<C64> {
        let (r0, c0) = (
            XiVector::block_offset(j.twice()),
            XiVector::block_offset(jp.twice()),
        );
        self.entries
            .view((r0, c0), (j.twice() as usize + 1, jp.twice() as usize + 1))
            .into_owned()
    }

    /// `max(1, max |entry|)`, the reference magnitude for tolerances.
    pub fn scale(&self) -> f64 {
        max_abs(&self.entries).max(1.0)
    }
}

/// Assembles `M_J` from a moment table. Needs moments through order `4J`.
pub fn build_moment_matrix(table: &MomentTable, top: HalfInt) -> Result<MomentMatrix> {
    let need = 2 * top.twice();
    if table.max_order() < need {
        return Err(Error::InsufficientOrder {
            have: table.max_order(),
            need,
        });
    }
    let xi = xi_vector(top);
    let n = xi.len();
    let mut m = DMatrix::<C64>::zeros(n, n);
    for (a, &ia) in xi.entries().iter().enumerate() {
        for (b, &ib) in xi.entries().iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (idx, c) in monomial_product(ia, ib, table.hbar())? {
                acc += c * table.get(idx.m, idx.n).ok_or(Error::MissingMoment(idx))?;
            }
            m[(a, b)] = acc;
        }
    }
    let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    Ok(MomentMatrix { xi, entries: m })
}

/// Centered second-moment matrix
/// `[[Vqq, Vqp + i hbar/2], [Vqp - i hbar/2, Vpp]]`, computed straight from
/// the table.
pub fn uncertainty_matrix(table: &MomentTable) -> Result<DMatrix<C64>> {
    let c = table.centered()?;
    let get = |m, n| {
        c.get(m, n)
            .ok_or(Error::MissingMoment(crate::MonomialIndex::new(m, n)))
    };
    let (vqq, vqp, vpp) = (get(2, 0)?, get(1, 1)?, get(0, 2)?);
    let h = table.hbar() / 2.0;
    Ok(DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(vqq, 0.0),
            C64::new(vqp, h),
            C64::new(vqp, -h),
            C64::new(vpp, 0.0),
        ],
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

/// One condition of the Schur chain: the leading diagonal block after
/// `level` pivots.
#[derive(Debug, Clone, PartialEq)]
pub struct SchurLevel {
    pub level: usize,
    pub residual: DMatrix<C64>,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchurStatus {
    /// Reduced all the way to block-diagonal form.
    Complete,
    /// The pivot needed to form `level` had a (near-)zero eigenvalue.
    PivotSingular { level: usize },
    /// The block at `level` has a clearly negative eigenvalue.
    Violated { level: usize },
}

impl SchurStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SchurStatus::Complete => "complete",
            SchurStatus::PivotSingular { .. } => "pivot-singular",
            SchurStatus::Violated { .. } => "violated",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchurChain {
    pub levels: Vec<SchurLevel>,
    pub status: SchurStatus,
    pub scale: f64,
    pub tolerance: f64,
}

impl SchurChain {
    /// `None` when a singular pivot stopped the reduction; defer to the
    /// eigenvalue test then.
    pub fn verdict(&self) -> Option<Verdict> {
        match self.status {
            SchurStatus::PivotSingular { .. } => None,
            SchurStatus::Violated { .. } => Some(Verdict::Fail),
            SchurStatus::Complete => {
                let floor = -self.tolerance * self.scale;
                Some(if self.levels.iter().all(|l| l.min_eigenvalue >= floor) {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                })
            }
        }
    }

    /// First level whose block has an eigenvalue below the tolerance.
    pub fn first_failing(&self) -> Option<&SchurLevel> {
        let floor = -self.tolerance * self.scale;
        self.levels.iter().find(|l| l.min_eigenvalue < floor)
    }
}

fn check_hermitian(m: &MomentMatrix) -> Result<()> {
    let defect = hermiticity_defect(&m.entries);
    if defect > HERMITIAN_TOL * m.scale() {
        return Err(Error::NotHermitian(defect));
    }
    Ok(())
}

/// [`schur_reduce_with`] at the default tolerance.
pub fn schur_reduce(m: &MomentMatrix) -> Result<SchurChain> {
    schur_reduce_with(m, DEFAULT_PSD_TOL)
}

/// Nested block reduction of `M_J`, pivoting in `j` order. Level 0 (the
/// scalar block) is used as a pivot but not reported; levels `1..=2J` are.
pub fn schur_reduce_with(m: &MomentMatrix, psd_tol: f64) -> Result<SchurChain> {
    check_hermitian(m)?;
    let scale = m.scale();
    let sizes: Vec<usize> = (0..=m.top().twice() as usize).map(|j2| j2 + 1).collect();
    let mut current = m.entries.clone();
    let mut levels = Vec::new();
    let mut status = SchurStatus::Complete;

    for (level, &size) in sizes.iter().enumerate() {
        let pivot = current.view((0, 0), (size, size)).into_owned();
        let min = min_eigenvalue(&pivot);
        let last = level + 1 == sizes.len();
        if level > 0 {
            levels.push(SchurLevel {
                level,
                residual: pivot.clone(),
                min_eigenvalue: min,
            });
        }
        if last {
            break;
        }
        if min < -psd_tol * scale {
            status = SchurStatus::Violated { level };
            break;
        }
        if min <= SINGULAR_TOL * scale {
            status = SchurStatus::PivotSingular { level: level + 1 };
            break;
        }
        let Some(chol) = pivot.clone().cholesky() else {
            status = SchurStatus::PivotSingular { level: level + 1 };
            break;
        };
        let rest = current.nrows() - size;
        let c = current.view((size, 0), (rest, size)).into_owned();
        let b = current.view((size, size), (rest, rest)).into_owned();
        let x = chol.solve(&c.adjoint());
        let s = b - &c * x;
        current = (&s + s.adjoint()) * C64::new(0.5, 0.0);
    }

    Ok(SchurChain {
        levels,
        status,
        scale,
        tolerance: psd_tol,
    })
}

/// Outcome of checking `M_J >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GupReport {
    pub top: HalfInt,
    pub verdict: Verdict,
    pub min_eigenvalue: f64,
    pub scale: f64,
    pub tolerance: f64,
    pub chain: SchurChain,
}

impl GupReport {
    pub fn first_failing_condition(&self) -> Option<&SchurLevel> {
        self.chain.first_failing()
    }

    /// JSON document; per-level residual matrices are included only with
    /// `with_residuals`.
    pub fn to_json_value(&self, with_residuals: bool) -> serde_json::Value {
        let level_json = |l: &SchurLevel| {
            let mut v = json!({ "level": l.level, "min_eig": l.min_eigenvalue });
            if with_residuals {
                v["residual"] = matrix_json(&l.residual);
            }
            v
        };
        let mut doc = json!({
            "J": self.top.to_string(),
            "verdict": self.verdict.as_str(),
            "min_eigenvalue": self.min_eigenvalue,
            "scale": self.scale,
            "tolerance": self.tolerance,
            "conditions": self.chain.levels.iter().map(level_json).collect::<Vec<_>>(),
            "schur_status": self.chain.status.as_str(),
        });
        if let SchurStatus::PivotSingular { level } | SchurStatus::Violated { level } =
            self.chain.status
        {
            doc["schur_level"] = json!(level);
        }
        if let Some(f) = self.first_failing_condition() {
            doc["first_failing_condition"] = json!({
                "level": f.level,
                "min_eig": f.min_eigenvalue,
                "residual": matrix_json(&f.residual),
            });
        }
        doc
    }
}

/// `{"re": [[...]], "im": [[...]]}`.
pub fn matrix_json(m: &DMatrix<C64>) -> serde_json::Value {
    let rows = |f: fn(&C64) -> f64| -> Vec<Vec<f64>> {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect())
            .collect()
    };
    json!({ "re": rows(|z| z.re), "im": rows(|z| z.im) })
}

/// Eigenvalue certification: passes when
/// `min eigenvalue >= -psd_tol * max(1, max |entry|)`. The Schur chain is
/// computed alongside for diagnostics; it does not affect the verdict.
pub fn check_psd(m: &MomentMatrix, psd_tol: f64) -> Result<GupReport> {
    check_hermitian(m)?;
    let scale = m.scale();
    let min = min_eigenvalue(&m.entries);
    let verdict = if min >= -psd_tol * scale {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let chain = schur_reduce_with(m, psd_tol)?;
    Ok(GupReport {
        top: m.top(),
        verdict,
        min_eigenvalue: min,
        scale,
        tolerance: psd_tol,
        chain,
    })
}

/// `<A^2><B^2> - <(AB+BA)/2>^2 - <(AB-BA)/2i>^2` for hermitian `A`, `B`.
/// Nonnegative for every state; zero at saturation.
pub fn schwartz_residual(
    table: &MomentTable,
    a: &WeylPolynomial,
    b: &WeylPolynomial,
) -> Result<f64> {
    if !a.is_hermitian() || !b.is_hermitian() {
        return Err(Error::NotHermitianPolynomial);
    }
    let need = 2 * a.degree().unwrap_or(0).max(b.degree().unwrap_or(0));
    if table.max_order() < need {
        return Err(Error::InsufficientOrder {
            have: table.max_order(),
            need,
        });
    }
    let ab = weyl_product(a, b)?;
    let ba = weyl_product(b, a)?;
    let a2 = weyl_product(a, a)?.expectation(table)?.re;
    let b2 = weyl_product(b, b)?.expectation(table)?.re;
    let anti = ab.add(&ba)?.expectation(table)?.re / 2.0;
    let comm = (ab.sub(&ba)?.expectation(table)? / C64::new(0.0, 2.0)).re;
    Ok(a2 * b2 - anti * anti - comm * comm)
}

/// Largest `J` whose whole ladder `M_0, M_1/2, ..., M_J` passes.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifiedOrder {
    /// `None` only when even `M_0` fails.
    pub top: Option<HalfInt>,
    pub reports: Vec<GupReport>,
    /// Report of the first failing level, if any.
    pub failure: Option<GupReport>,
}

pub fn max_certified_order(table: &MomentTable, psd_tol: f64) -> Result<CertifiedOrder> {
    let mut reports = Vec::new();
    let mut top = None;
    let mut failure = None;
    for j2 in 0..=table.max_order() / 2 {
        let j = HalfInt::from_twice(j2);
        let report = check_psd(&build_moment_matrix(table, j)?, psd_tol)?;
        if report.verdict.passed() {
            top = Some(j);
            reports.push(report);
        } else {
            failure = Some(report);
            break;
        }
    }
    Ok(CertifiedOrder {
        top,
        reports,
        failure,
    })
}
