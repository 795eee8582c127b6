//! Tables of Wigner moments `bar(q^m p^n) = <T_{m,n}>` and the routes that
//! produce them: analytic Gaussian states, Fock-basis density matrices and
//! sampled Wigner functions.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{safe_dim, WeylOperatorBasis};
use crate::linalg::{hermitian_eigenvalues, hermiticity_defect, symmetric_eigenvalues};
use crate::weyl::{binomial_f64, MonomialIndex};
use crate::{C64, MAX_DEGREE};

fn check_order(max_order: u32) -> Result<()> {
    if !max_order.is_multiple_of(2) {
        return Err(Error::OddOrder(max_order));
    }
    if max_order > MAX_DEGREE {
        return Err(Error::DegreeTooHigh(max_order));
    }
    Ok(())
}

/// Real Wigner moments up to a fixed total order.
///
/// Construction does not validate; use [`validate_table`] or load through
/// [`MomentTable::from_json`], which rejects incomplete tables.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    hbar: f64,
    max_order: u32,
    moments: BTreeMap<MonomialIndex, f64>,
}

#[derive(Serialize, Deserialize)]
struct TableJson {
    hbar: f64,
    max_order: u32,
    moments: BTreeMap<String, f64>,
}

impl MomentTable {
    pub fn new(hbar: f64, max_order: u32, moments: BTreeMap<MonomialIndex, f64>) -> Self {
        MomentTable {
            hbar,
            max_order,
            moments,
        }
    }

    /// Fills every `(m, n)` with `m + n <= max_order` from `f`.
    pub fn from_fn(hbar: f64, max_order: u32, mut f: impl FnMut(MonomialIndex) -> f64) -> Self {
        let moments = MonomialIndex::up_to_degree(max_order)
            .map(|idx| (idx, f(idx)))
            .collect();
        MomentTable {
            hbar,
            max_order,
            moments,
        }
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn max_order(&self) -> u32 {
        self.max_order
    }

    pub fn get(&self, m: u32, n: u32) -> Option<f64> {
        self.moments.get(&MonomialIndex::new(m, n)).copied()
    }

    pub fn moments(&self) -> impl Iterator<Item = (MonomialIndex, f64)> + '_ {
        self.moments.iter().map(|(k, v)| (*k, *v))
    }

    pub fn set(&mut self, m: u32, n: u32, value: f64) {
        self.moments.insert(MonomialIndex::new(m, n), value);
    }

    pub fn remove(&mut self, m: u32, n: u32) -> Option<f64> {
        self.moments.remove(&MonomialIndex::new(m, n))
    }

    fn require(&self, m: u32, n: u32) -> Result<f64> {
        self.get(m, n)
            .ok_or(Error::MissingMoment(MonomialIndex::new(m, n)))
    }

    pub fn require_hbar(&self, hbar: f64) -> Result<()> {
        if self.hbar == hbar {
            Ok(())
        } else {
            Err(Error::HbarMismatch(self.hbar, hbar))
        }
    }

    /// `(bar q, bar p)`.
    pub fn mean(&self) -> Result<(f64, f64)> {
        Ok((self.require(1, 0)?, self.require(0, 1)?))
    }

    /// Moments of the state shifted by `(dq, dp)` in phase space:
    /// `bar((q+dq)^m (p+dp)^n)` by binomial expansion. Weyl ordering commutes
    /// with c-number shifts, so this is exact.
    pub fn displaced(&self, dq: f64, dp: f64) -> Result<MomentTable> {
        let mut out = BTreeMap::new();
        for idx in MonomialIndex::up_to_degree(self.max_order) {
            let mut acc = 0.0;
            for a in 0..=idx.m {
                for b in 0..=idx.n {
                    let w = binomial_f64(idx.m, a) * binomial_f64(idx.n, b);
                    acc += w
                        * dq.powi((idx.m - a) as i32)
                        * dp.powi((idx.n - b) as i32)
                        * self.require(a, b)?;
                }
            }
            out.insert(idx, acc);
        }
        Ok(MomentTable::new(self.hbar, self.max_order, out))
    }

    /// Shifts the means to zero.
    pub fn centered(&self) -> Result<MomentTable> {
        let (q, p) = self.mean()?;
        self.displaced(-q, -p)
    }

    /// Divides every moment by `bar 1`.
    pub fn normalized(&self) -> Result<MomentTable> {
        let norm = self.require(0, 0)?;
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Normalization(norm));
        }
        Ok(MomentTable {
            hbar: self.hbar,
            max_order: self.max_order,
            moments: self.moments.iter().map(|(k, v)| (*k, v / norm)).collect(),
        })
    }

    /// `(bar q^0, bar q^1, ..., bar q^max_order)`.
    pub fn q_marginal(&self) -> Result<Vec<f64>> {
        (0..=self.max_order).map(|k| self.require(k, 0)).collect()
    }

    pub fn p_marginal(&self) -> Result<Vec<f64>> {
        (0..=self.max_order).map(|k| self.require(0, k)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("tables serialize")
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let doc = TableJson {
            hbar: self.hbar,
            max_order: self.max_order,
            moments: self
                .moments
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
        };
        serde_json::to_value(doc).expect("tables serialize")
    }

    /// Parses `{"hbar", "max_order", "moments": {"m,n": value}}`. Keys must be
    /// in range and the table complete, normalized and even-ordered.
    pub fn from_json(text: &str) -> Result<MomentTable> {
        let doc: TableJson = serde_json::from_str(text)?;
        if !(doc.hbar.is_finite() && doc.hbar > 0.0) {
            return Err(Error::InvalidHbar(doc.hbar));
        }
        check_order(doc.max_order)?;
        let mut moments = BTreeMap::new();
        for (key, value) in doc.moments {
            let idx = parse_key(&key)
                .ok_or_else(|| Error::InvalidTable(format!("bad moment key {key:?}")))?;
            if idx.degree() > doc.max_order {
                return Err(Error::InvalidTable(format!(
                    "moment {key} above max_order {}",
                    doc.max_order
                )));
            }
            moments.insert(idx, value);
        }
        let table = MomentTable::new(doc.hbar, doc.max_order, moments);
        let report = validate_table(&table);
        for name in ["complete", "normalized", "finite"] {
            if let Some(c) = report.checks.iter().find(|c| c.name == name && !c.passed) {
                return Err(Error::InvalidTable(c.detail.clone()));
            }
        }
        Ok(table)
    }
}

fn parse_key(key: &str) -> Option<MonomialIndex> {
    let (m, n) = key.split_once(',')?;
    Some(MonomialIndex::new(
        m.trim().parse().ok()?,
        n.trim().parse().ok()?,
    ))
}

/// One named check in a [`ValidationReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

const NORMALIZATION_TOL: f64 = 1e-9;

/// Structural sanity checks: even order, completeness, normalization,
/// finiteness and `bar q^{2k}, bar p^{2k} >= 0`.
pub fn validate_table(table: &MomentTable) -> ValidationReport {
    let mut checks = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        checks.push(Check {
            name: name.to_string(),
            passed,
            detail,
        });
    };

    push(
        "even_order",
        table.max_order.is_multiple_of(2),
        format!("max_order {}", table.max_order),
    );

    let missing: Vec<String> = MonomialIndex::up_to_degree(table.max_order)
        .filter(|idx| !table.moments.contains_key(idx))
        .map(|idx| idx.to_string())
        .collect();
    push(
        "complete",
        missing.is_empty(),
        if missing.is_empty() {
            "all moments present".into()
        } else {
            format!("missing moments {}", missing.join(" "))
        },
    );

    match table.get(0, 0) {
        Some(v) => push(
            "normalized",
            (v - 1.0).abs() <= NORMALIZATION_TOL,
            format!("bar 1 = {v}"),
        ),
        None => push("normalized", false, "bar 1 missing".into()),
    }

    let bad: Vec<String> = table
        .moments
        .iter()
        .filter(|(_, v)| !v.is_finite())
        .map(|(k, _)| k.to_string())
        .collect();
    push(
        "finite",
        bad.is_empty(),
        if bad.is_empty() {
            "all finite".into()
        } else {
            format!("non-finite moments {}", bad.join(" "))
        },
    );

    let mut negative = Vec::new();
    for k in (2..=table.max_order).step_by(2) {
        for idx in [MonomialIndex::new(k, 0), MonomialIndex::new(0, k)] {
            if let Some(v) = table.moments.get(&idx) {
                if *v < 0.0 {
                    negative.push(format!("{idx}={v}"));
                }
            }
        }
    }
    push(
        "diagonal_positivity",
        negative.is_empty(),
        if negative.is_empty() {
            "even marginal moments nonnegative".into()
        } else {
            format!("negative {}", negative.join(" "))
        },
    );

    ValidationReport { checks }
}

/// A Gaussian Wigner function with mean `(bar q, bar p)` and covariance `V`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    mean: [f64; 2],
    covariance: [[f64; 2]; 2],
}

impl GaussianState {
    /// `covariance` must be symmetric positive definite.
    pub fn new(mean: [f64; 2], covariance: [[f64; 2]; 2]) -> Result<Self> {
        let [[a, b], [c, d]] = covariance;
        let scale = a.abs().max(d.abs()).max(1.0);
        let finite = mean
            .iter()
            .chain(covariance.iter().flatten())
            .all(|x| x.is_finite());
        if !finite || (b - c).abs() > 1e-12 * scale || a <= 0.0 || a * d - b * c <= 0.0 {
            return Err(Error::InvalidCovariance);
        }
        Ok(GaussianState {
            mean,
            covariance: [[a, b], [b, d]],
        })
    }

    /// Ground state of the oscillator, `V = (hbar/2) I`.
    pub fn vacuum(hbar: f64) -> Self {
        GaussianState {
            mean: [0.0, 0.0],
            covariance: [[hbar / 2.0, 0.0], [0.0, hbar / 2.0]],
        }
    }

    /// Centered state with `V = variance * I`.
    pub fn isotropic(variance: f64) -> Result<Self> {
        Self::new([0.0, 0.0], [[variance, 0.0], [0.0, variance]])
    }

    pub fn mean(&self) -> [f64; 2] {
        self.mean
    }

    pub fn covariance(&self) -> [[f64; 2]; 2] {
        self.covariance
    }

    pub fn det(&self) -> f64 {
        let [[a, b], [c, d]] = self.covariance;
        a * d - b * c
    }

    /// `det V >= hbar^2 / 4`, the Robertson-Schrodinger bound.
    pub fn is_physical(&self, hbar: f64) -> bool {
        self.det() >= hbar * hbar / 4.0 * (1.0 - 1e-12)
    }

    /// The Gaussian density at `(q, p)`.
    pub fn density(&self, q: f64, p: f64) -> f64 {
        let [[a, b], [_, d]] = self.covariance;
        let det = self.det();
        let (x, y) = (q - self.mean[0], p - self.mean[1]);
        let quad = (d * x * x - 2.0 * b * x * y + a * y * y) / det;
        (-0.5 * quad).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
    }
}

/// Exact moments of a Gaussian: centered moments by the Isserlis recurrence
/// `E[q^a p^b] = (a-1) V_qq E[q^{a-2} p^b] + b V_qp E[q^{a-1} p^{b-1}]`,
/// then shifted by the mean.
pub fn gaussian_moments(g: &GaussianState, max_order: u32, hbar: f64) -> Result<MomentTable> {
    check_order(max_order)?;
    if !(hbar.is_finite() && hbar > 0.0) {
        return Err(Error::InvalidHbar(hbar));
    }
    let [[vqq, vqp], [_, vpp]] = g.covariance;
    let n = max_order as usize;
    let mut c = vec![vec![0.0f64; n + 1]; n + 1];
    c[0][0] = 1.0;
    for deg in 1..=n {
        for b in 0..=deg {
            let a = deg - b;
            c[a][b] = if a == 0 {
                if b >= 2 {
                    (b - 1) as f64 * vpp * c[0][b - 2]
                } else {
                    0.0
                }
            } else {
                let mut v = 0.0;
                if a >= 2 {
                    v += (a - 1) as f64 * vqq * c[a - 2][b];
                }
                if b >= 1 {
                    v += b as f64 * vqp * c[a - 1][b - 1];
                }
                v
            };
        }
    }
    let centered = MomentTable::from_fn(hbar, max_order, |idx| c[idx.m as usize][idx.n as usize]);
    centered.displaced(g.mean[0], g.mean[1])
}

/// A density matrix in the Fock basis `|0>, ..., |N-1>`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDensityMatrix {
    entries: DMatrix<C64>,
}

#[derive(Serialize, Deserialize)]
struct DensityJson {
    dim: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hbar: Option<f64>,
}

impl FockDensityMatrix {
    /// Checks hermiticity (1e-12), unit trace (1e-12) and
    /// `min eigenvalue >= -1e-10`.
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "density matrix is {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let defect = hermiticity_defect(&entries);
        if defect > 1e-12 {
            return Err(Error::NotHermitian(defect));
        }
        let tr = entries.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > 1e-12 {
            return Err(Error::InvalidTrace(tr.re));
        }
        let min = hermitian_eigenvalues(&entries)[0];
        if min < -1e-10 {
            return Err(Error::NotPositive(min));
        }
        Ok(FockDensityMatrix { entries })
    }

    /// `|n><n|` in a space of `dim` levels.
    pub fn fock(n: usize, dim: usize) -> Result<Self> {
        if n >= dim {
            return Err(Error::DimensionMismatch(format!(
                "level {n} outside dim {dim}"
            )));
        }
        let mut m = DMatrix::zeros(dim, dim);
        m[(n, n)] = C64::new(1.0, 0.0);
        Self::new(m)
    }

    /// `|psi><psi|`, normalizing `psi`.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if psi.is_empty() || norm == 0.0 {
            return Err(Error::InvalidTrace(0.0));
        }
        let v: Vec<C64> = psi.iter().map(|z| z / norm).collect();
        let n = v.len();
        Self::new(DMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj()))
    }

    /// Convex combination `sum w_k |psi_k><psi_k|` with weights normalized.
    pub fn mixture(states: &[(f64, Vec<C64>)]) -> Result<Self> {
        let dim = states.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
        let total: f64 = states.iter().map(|(w, _)| *w).sum();
        if dim == 0 || total <= 0.0 || states.iter().any(|(w, _)| *w < 0.0) {
            return Err(Error::InvalidTrace(total));
        }
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for (w, psi) in states {
            let norm_sq: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
            if norm_sq == 0.0 {
                return Err(Error::InvalidTrace(0.0));
            }
            let k = w / total / norm_sq;
            for i in 0..psi.len() {
                for j in 0..psi.len() {
                    m[(i, j)] += psi[i] * psi[j].conj() * k;
                }
            }
        }
        // wash out round-off in the trace
        let tr = m.trace().re;
        Self::new(m / C64::new(tr, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn to_json(&self) -> String {
        let n = self.dim();
        let doc = DensityJson {
            dim: n,
            re: (0..n)
                .map(|i| (0..n).map(|j| self.entries[(i, j)].re).collect())
                .collect(),
            im: (0..n)
                .map(|i| (0..n).map(|j| self.entries[(i, j)].im).collect())
                .collect(),
            hbar: None,
        };
        serde_json::to_string_pretty(&doc).expect("density matrices serialize")
    }

    /// Parses `{"dim", "re", "im"}`; an optional `"hbar"` is returned
    /// alongside so callers can reject mixed conventions.
    pub fn from_json(text: &str) -> Result<(Self, Option<f64>)> {
        let doc: DensityJson = serde_json::from_str(text)?;
        let n = doc.dim;
        let shape_ok = |rows: &Vec<Vec<f64>>| rows.len() == n && rows.iter().all(|r| r.len() == n);
        if !shape_ok(&doc.re) || !shape_ok(&doc.im) {
            return Err(Error::DimensionMismatch(format!(
                "re/im must both be {n}x{n}"
            )));
        }
        let m = DMatrix::from_fn(n, n, |i, j| C64::new(doc.re[i][j], doc.im[i][j]));
        Ok((Self::new(m)?, doc.hbar))
    }
}

/// Working dimension used to extract moments up to `max_order` from a state
/// supported on `state_dim` levels.
pub fn fock_working_dim(state_dim: usize, max_order: u32) -> usize {
    safe_dim(max_order).max(state_dim + max_order as usize)
}

/// `bar(q^m p^n) = tr(rho T_{m,n})` with the operators taken from the
/// truncated Fock oracle. The state is zero-padded so that no word of
/// ladder operators reaches the truncation edge.
pub fn moments_from_fock_dm(
    rho: &FockDensityMatrix,
    max_order: u32,
    hbar: f64,
) -> Result<MomentTable> {
    check_order(max_order)?;
    if !(hbar.is_finite() && hbar > 0.0) {
        return Err(Error::InvalidHbar(hbar));
    }
    let basis = WeylOperatorBasis::new(max_order, fock_working_dim(rho.dim(), max_order), hbar)?;
    moments_with_basis(rho, &basis, max_order)
}

/// [`moments_from_fock_dm`] against a prebuilt operator basis.
pub fn moments_with_basis(
    rho: &FockDensityMatrix,
    basis: &WeylOperatorBasis,
    max_order: u32,
) -> Result<MomentTable> {
    check_order(max_order)?;
    if max_order > basis.max_degree() {
        return Err(Error::InsufficientOrder {
            have: basis.max_degree(),
            need: max_order,
        });
    }
    let need = rho.dim() + max_order as usize;
    if basis.dim() < need {
        return Err(Error::TruncationUnsafe {
            dim: basis.dim(),
            need,
        });
    }
    let mut out = BTreeMap::new();
    for idx in MonomialIndex::up_to_degree(max_order) {
        let z = basis.expectation(rho, idx)?;
        if z.im.abs() > 1e-10 * z.re.abs().max(1.0) {
            return Err(Error::NotHermitian(z.im.abs()));
        }
        out.insert(idx, z.re);
    }
    // the trace is 1 only up to round-off
    MomentTable::new(basis.hbar(), max_order, out).normalized()
}

/// Samples of `W(q, p)` on a uniform rectangular grid, row-major with `q`
/// as the slow index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub q_min: f64,
    pub q_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub nq: usize,
    pub np: usize,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,
}

impl WignerGrid {
    pub fn new(
        q_range: (f64, f64),
        p_range: (f64, f64),
        nq: usize,
        np: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        let grid = WignerGrid {
            q_min: q_range.0,
            q_max: q_range.1,
            p_min: p_range.0,
            p_max: p_range.1,
            nq,
            np,
            values,
            hbar: None,
        };
        grid.check()?;
        Ok(grid)
    }

    /// Samples `f(q, p)` at every grid node.
    pub fn sample(
        q_range: (f64, f64),
        p_range: (f64, f64),
        nq: usize,
        np: usize,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut grid = WignerGrid::new(q_range, p_range, nq, np, vec![0.0; nq * np])?;
        for i in 0..nq {
            for j in 0..np {
                grid.values[i * np + j] = f(grid.q_at(i), grid.p_at(j));
            }
        }
        Ok(grid)
    }

    fn check(&self) -> Result<()> {
        let ordered = |a: f64, b: f64| a.is_finite() && b.is_finite() && a < b;
        if !ordered(self.q_min, self.q_max) || !ordered(self.p_min, self.p_max) {
            return Err(Error::InvalidGrid(
                "ranges must be finite and strictly increasing".into(),
            ));
        }
        if self.nq < 2 || self.np < 2 {
            return Err(Error::InvalidGrid("need at least 2 points per axis".into()));
        }
        if self.values.len() != self.nq * self.np {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                self.nq * self.np,
                self.values.len()
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("non-finite sample".into()));
        }
        Ok(())
    }

    pub fn q_at(&self, i: usize) -> f64 {
        self.q_min + (self.q_max - self.q_min) * i as f64 / (self.nq - 1) as f64
    }

    pub fn p_at(&self, j: usize) -> f64 {
        self.p_min + (self.p_max - self.p_min) * j as f64 / (self.np - 1) as f64
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let grid: WignerGrid = serde_json::from_str(text)?;
        grid.check()?;
        Ok(grid)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("grids serialize")
    }
}

/// Tolerances for [`moments_from_grid`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    /// Allowed `|integral W - 1|`.
    pub norm_tol: f64,
    /// Turn support warnings into errors.
    pub strict: bool,
    pub hbar: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            norm_tol: 1e-3,
            strict: false,
            hbar: 1.0,
        }
    }
}

/// Result of integrating a sampled Wigner function.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMoments {
    /// Renormalized by the computed `bar 1`.
    pub table: MomentTable,
    pub raw_normalization: f64,
    /// Moments whose weighted mass in the outer 10% of the grid exceeds
    /// 1e-3 of the total.
    pub support_limited: Vec<MonomialIndex>,
}

const EDGE_FRACTION: f64 = 0.1;
const EDGE_MASS_TOL: f64 = 1e-3;

fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    (0..n)
        .map(|i| if i == 0 || i == n - 1 { h / 2.0 } else { h })
        .collect()
}

/// Trapezoidal integration of `q^m p^n W(q, p)` over the grid.
pub fn moments_from_grid(w: &WignerGrid, max_order: u32, opts: GridOptions) -> Result<GridMoments> {
    check_order(max_order)?;
    w.check()?;
    if let Some(h) = w.hbar {
        if h != opts.hbar {
            return Err(Error::HbarMismatch(h, opts.hbar));
        }
    }
    let wq = trapezoid_weights(w.nq, (w.q_max - w.q_min) / (w.nq - 1) as f64);
    let wp = trapezoid_weights(w.np, (w.p_max - w.p_min) / (w.np - 1) as f64);
    let edge = |n: usize| ((n as f64 * EDGE_FRACTION).ceil() as usize).max(1);
    let (eq, ep) = (edge(w.nq), edge(w.np));
    let outer = |i: usize, j: usize| i < eq || i >= w.nq - eq || j < ep || j >= w.np - ep;

    let qs: Vec<f64> = (0..w.nq).map(|i| w.q_at(i)).collect();
    let ps: Vec<f64> = (0..w.np).map(|j| w.p_at(j)).collect();

    let mut raw = BTreeMap::new();
    let mut support_limited = Vec::new();
    for idx in MonomialIndex::up_to_degree(max_order) {
        let (mut sum, mut abs_total, mut abs_outer) = (0.0, 0.0, 0.0);
        for i in 0..w.nq {
            let qi = qs[i].powi(idx.m as i32) * wq[i];
            for j in 0..w.np {
                let v = qi * ps[j].powi(idx.n as i32) * wp[j] * w.values[i * w.np + j];
                sum += v;
                abs_total += v.abs();
                if outer(i, j) {
                    abs_outer += v.abs();
                }
            }
        }
        if abs_outer > EDGE_MASS_TOL * abs_total {
            support_limited.push(idx);
        }
        raw.insert(idx, sum);
    }

    let norm = raw[&MonomialIndex::ONE];
    if !norm.is_finite() || (norm - 1.0).abs() > opts.norm_tol {
        return Err(Error::Normalization(norm));
    }
    if opts.strict && !support_limited.is_empty() {
        return Err(Error::SupportLimited(support_limited));
    }
    let table = MomentTable::new(opts.hbar, max_order, raw).normalized()?;
    Ok(GridMoments {
        table,
        raw_normalization: norm,
        support_limited,
    })
}

/// Hankel matrix `H_{ab} = gamma_{a+b}` of a moment sequence
/// `gamma_0, ..., gamma_{2k}`.
pub fn hankel_matrix(gamma: &[f64]) -> Result<DMatrix<f64>> {
    if gamma.len().is_multiple_of(2) {
        return Err(Error::EvenHankelLength(gamma.len()));
    }
    let k = gamma.len() / 2 + 1;
    Ok(DMatrix::from_fn(k, k, |a, b| gamma[a + b]))
}

/// Smallest eigenvalue of the Hankel matrix of `gamma`.
pub fn hankel_min_eigenvalue(gamma: &[f64]) -> Result<f64> {
    let h = hankel_matrix(gamma)?;
    Ok(symmetric_eigenvalues(&h)[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_second_and_fourth_moments() {
        for hbar in [1.0, 0.5, 2.0] {
            let t = gaussian_moments(&GaussianState::vacuum(hbar), 4, hbar).unwrap();
            assert_eq!(t.get(0, 0), Some(1.0));
            assert!((t.get(2, 0).unwrap() - hbar / 2.0).abs() < 1e-15);
            assert!((t.get(0, 2).unwrap() - hbar / 2.0).abs() < 1e-15);
            assert_eq!(t.get(1, 1), Some(0.0));
            assert!((t.get(4, 0).unwrap() - 3.0 * hbar * hbar / 4.0).abs() < 1e-15);
            assert!((t.get(2, 2).unwrap() - hbar * hbar / 4.0).abs() < 1e-15);
            assert_eq!(t.get(3, 1), Some(0.0));
        }
    }

    #[test]
    fn mean_shift() {
        let g = GaussianState::new([1.0, 0.0], [[0.5, 0.0], [0.0, 0.5]]).unwrap();
        let t = gaussian_moments(&g, 2, 1.0).unwrap();
        assert_eq!(t.get(1, 0), Some(1.0));
        assert_eq!(t.get(0, 1), Some(0.0));
        assert!((t.get(2, 0).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn correlated_gaussian_against_direct_formula() {
        // E[q^2 p^2] = Vqq Vpp + 2 Vqp^2, E[q^3 p] = 3 Vqq Vqp
        let g = GaussianState::new([0.0, 0.0], [[1.3, 0.4], [0.4, 0.9]]).unwrap();
        let t = gaussian_moments(&g, 4, 1.0).unwrap();
        assert!((t.get(2, 2).unwrap() - (1.3 * 0.9 + 2.0 * 0.16)).abs() < 1e-14);
        assert!((t.get(3, 1).unwrap() - 3.0 * 1.3 * 0.4).abs() < 1e-14);
        assert!((t.get(1, 3).unwrap() - 3.0 * 0.9 * 0.4).abs() < 1e-14);
    }

    #[test]
    fn bad_gaussians_rejected() {
        assert!(GaussianState::new([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]]).is_err());
        assert!(GaussianState::new([0.0, 0.0], [[1.0, 0.1], [0.2, 1.0]]).is_err());
        assert!(GaussianState::new([0.0, 0.0], [[-1.0, 0.0], [0.0, -1.0]]).is_err());
        assert!(gaussian_moments(&GaussianState::vacuum(1.0), 3, 1.0).is_err());
        assert!(!GaussianState::isotropic(0.25).unwrap().is_physical(1.0));
        assert!(GaussianState::vacuum(1.0).is_physical(1.0));
    }

    #[test]
    fn fock_moments() {
        let h = 1.0;
        let one = FockDensityMatrix::fock(1, 2).unwrap();
        let t = moments_from_fock_dm(&one, 4, h).unwrap();
        assert!((t.get(2, 0).unwrap() - 1.5 * h).abs() < 1e-12);
        assert!((t.get(0, 2).unwrap() - 1.5 * h).abs() < 1e-12);
        assert!(t.get(1, 1).unwrap().abs() < 1e-12);
        assert!((t.get(4, 0).unwrap() - 15.0 * h * h / 4.0).abs() < 1e-12);
    }

    #[test]
    fn vacuum_routes_agree() {
        let h = 0.8;
        let a = gaussian_moments(&GaussianState::vacuum(h), 6, h).unwrap();
        let b = moments_from_fock_dm(&FockDensityMatrix::fock(0, 1).unwrap(), 6, h).unwrap();
        for (idx, v) in a.moments() {
            assert!((v - b.get(idx.m, idx.n).unwrap()).abs() < 1e-12, "{idx}");
        }
    }

    #[test]
    fn density_matrix_validation() {
        let i = C64::i();
        let one = C64::new(1.0, 0.0);
        let half = C64::new(0.5, 0.0);
        let z = C64::new(0.0, 0.0);
        assert!(matches!(
            FockDensityMatrix::new(DMatrix::from_row_slice(2, 2, &[half, i, z, half])),
            Err(Error::NotHermitian(_))
        ));
        assert!(matches!(
            FockDensityMatrix::new(DMatrix::from_row_slice(2, 2, &[one, z, z, one])),
            Err(Error::InvalidTrace(_))
        ));
        assert!(matches!(
            FockDensityMatrix::new(DMatrix::from_row_slice(2, 2, &[half, one, one, half])),
            Err(Error::NotPositive(_))
        ));
    }

    #[test]
    fn density_json_round_trip() {
        let psi = [C64::new(0.6, 0.0), C64::new(0.0, 0.8)];
        let rho = FockDensityMatrix::pure(&psi).unwrap();
        let (back, hbar) = FockDensityMatrix::from_json(&rho.to_json()).unwrap();
        assert_eq!(hbar, None);
        assert!((back.entries() - rho.entries()).norm() < 1e-15);
    }

    #[test]
    fn table_json_round_trip_and_completeness() {
        let t = gaussian_moments(&GaussianState::vacuum(1.0), 4, 1.0).unwrap();
        assert_eq!(MomentTable::from_json(&t.to_json()).unwrap(), t);
        // arbitrary doubles must survive bit for bit
        let g = GaussianState::new([0.3, -0.7], [[0.81, 0.13], [0.13, 0.77]]).unwrap();
        let t6 = gaussian_moments(&g, 6, 0.9).unwrap();
        assert_eq!(MomentTable::from_json(&t6.to_json()).unwrap(), t6);

        let mut broken = t.clone();
        broken.remove(1, 1);
        assert!(matches!(
            MomentTable::from_json(&broken.to_json()),
            Err(Error::InvalidTable(_))
        ));

        let odd =
            r#"{"hbar": 1.0, "max_order": 1, "moments": {"0,0": 1.0, "1,0": 0.0, "0,1": 0.0}}"#;
        assert!(matches!(
            MomentTable::from_json(odd),
            Err(Error::OddOrder(1))
        ));
        let bad_key = r#"{"hbar": 1.0, "max_order": 0, "moments": {"0,0": 1.0, "x": 0.0}}"#;
        assert!(MomentTable::from_json(bad_key).is_err());
        let no_hbar = r#"{"max_order": 0, "moments": {"0,0": 1.0}}"#;
        assert!(MomentTable::from_json(no_hbar).is_err());
    }

    #[test]
    fn validation_reports() {
        let t = gaussian_moments(&GaussianState::vacuum(1.0), 2, 1.0).unwrap();
        assert!(validate_table(&t).passed());

        let mut missing = t.clone();
        missing.remove(1, 1);
        let r = validate_table(&missing);
        assert_eq!(
            r.failures().map(|c| c.name.as_str()).collect::<Vec<_>>(),
            vec!["complete"]
        );

        let mut negative = t.clone();
        negative.set(2, 0, -1.0);
        let r = validate_table(&negative);
        assert_eq!(
            r.failures().map(|c| c.name.as_str()).collect::<Vec<_>>(),
            vec!["diagonal_positivity"]
        );
    }

    #[test]
    fn displacement_round_trip() {
        let g = GaussianState::new([0.3, -1.2], [[0.7, 0.1], [0.1, 0.9]]).unwrap();
        let t = gaussian_moments(&g, 6, 1.0).unwrap();
        let c = t.centered().unwrap();
        assert!(c.get(1, 0).unwrap().abs() < 1e-14);
        let back = c.displaced(0.3, -1.2).unwrap();
        for (idx, v) in t.moments() {
            assert!((v - back.get(idx.m, idx.n).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn hankel_examples() {
        let h = hankel_matrix(&[1.0, 0.0, 1.0, 0.0, 3.0]).unwrap();
        assert_eq!(
            h,
            DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 3.0])
        );
        // eigenvalues of [[1,1],[1,3]] and 1: 2 -/+ sqrt(2), 1
        assert!(
            (hankel_min_eigenvalue(&[1.0, 0.0, 1.0, 0.0, 3.0]).unwrap() - (2.0 - 2f64.sqrt()))
                .abs()
                < 1e-14
        );
        assert_eq!(hankel_min_eigenvalue(&[1.0, 0.0, -1.0]).unwrap(), -1.0);
        assert_eq!(
            hankel_matrix(&[1.0]).unwrap(),
            DMatrix::from_element(1, 1, 1.0)
        );
        assert!(matches!(
            hankel_matrix(&[1.0, 0.0]),
            Err(Error::EvenHankelLength(2))
        ));
    }

    #[test]
    fn zero_grid_fails_normalization() {
        let g = WignerGrid::new((-1.0, 1.0), (-1.0, 1.0), 3, 3, vec![0.0; 9]).unwrap();
        assert!(
            matches!(moments_from_grid(&g, 2, GridOptions::default()), Err(Error::Normalization(n)) if n == 0.0)
        );
    }

    #[test]
    fn grid_shape_validation() {
        assert!(WignerGrid::new((1.0, -1.0), (-1.0, 1.0), 3, 3, vec![0.0; 9]).is_err());
        assert!(WignerGrid::new((-1.0, 1.0), (-1.0, 1.0), 1, 3, vec![0.0; 3]).is_err());
        assert!(WignerGrid::new((-1.0, 1.0), (-1.0, 1.0), 3, 3, vec![0.0; 8]).is_err());
    }

    #[test]
    fn narrow_grid_is_support_limited() {
        let h = 1.0;
        let vac = GaussianState::vacuum(h);
        let g = WignerGrid::sample((-2.5, 2.5), (-2.5, 2.5), 101, 101, |q, p| vac.density(q, p))
            .unwrap();
        let loose = GridOptions {
            norm_tol: 0.05,
            ..GridOptions::default()
        };
        let out = moments_from_grid(&g, 4, loose).unwrap();
        assert!(out.support_limited.contains(&MonomialIndex::new(4, 0)));
        let strict = GridOptions {
            strict: true,
            ..loose
        };
        assert!(matches!(
            moments_from_grid(&g, 4, strict),
            Err(Error::SupportLimited(_))
        ));
    }
}
