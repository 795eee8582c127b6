//! Python bindings. Monomials are `(m, n)` tuples, polynomials are dicts
//! from monomials to complex coefficients, and half-integers are strings
//! such as `"3/2"`.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use wigner_gup as core;
use wigner_gup::{HalfInt, MomentTable, MonomialIndex, SymplecticMap, WeylPolynomial, C64};

fn err(e: core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn half(s: &str) -> PyResult<HalfInt> {
    s.parse().map_err(err)
}

fn symplectic(m: [[f64; 2]; 2]) -> PyResult<SymplecticMap> {
    SymplecticMap::new(m[0][0], m[0][1], m[1][0], m[1][1]).map_err(err)
}

fn polynomial(terms: BTreeMap<(u32, u32), C64>, hbar: f64) -> PyResult<WeylPolynomial> {
    if !(hbar.is_finite() && hbar >= 0.0) {
        return Err(err(core::Error::InvalidHbar(hbar)));
    }
    Ok(WeylPolynomial::from_terms(
        hbar,
        terms
            .into_iter()
            .map(|((m, n), c)| (MonomialIndex::new(m, n), c)),
    ))
}

fn terms_of(p: &WeylPolynomial) -> BTreeMap<(u32, u32), C64> {
    p.terms().map(|(idx, c)| ((idx.m, idx.n), c)).collect()
}

fn rows<T: Copy>(m: &nalgebra::DMatrix<T>) -> Vec<Vec<T>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn to_python<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (v.to_string(),))
}

/// Wigner moments `bar(q^m p^n)` for `m + n <= max_order`.
#[pyclass(name = "MomentTable", module = "wigner_gup", frozen)]
struct PyMomentTable {
    inner: MomentTable,
}

#[pymethods]
impl PyMomentTable {
    /// Builds a table from `{(m, n): value}` and validates it.
    #[new]
    #[pyo3(signature = (moments, max_order, hbar = 1.0))]
    fn new(moments: BTreeMap<(u32, u32), f64>, max_order: u32, hbar: f64) -> PyResult<Self> {
        let map = moments
            .into_iter()
            .map(|((m, n), v)| (MonomialIndex::new(m, n), v))
            .collect();
        let inner = MomentTable::new(hbar, max_order, map);
        let report = core::validate_table(&inner);
        if let Some(f) = report.failures().next() {
            return Err(PyValueError::new_err(format!("{}: {}", f.name, f.detail)));
        }
        Ok(PyMomentTable { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyMomentTable {
            inner: MomentTable::from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn hbar(&self) -> f64 {
        self.inner.hbar()
    }

    #[getter]
    fn max_order(&self) -> u32 {
        self.inner.max_order()
    }

    fn get(&self, m: u32, n: u32) -> Option<f64> {
        self.inner.get(m, n)
    }

    fn moments(&self) -> BTreeMap<(u32, u32), f64> {
        self.inner
            .moments()
            .map(|(idx, v)| ((idx.m, idx.n), v))
            .collect()
    }

    fn mean(&self) -> PyResult<(f64, f64)> {
        self.inner.mean().map_err(err)
    }

    fn displaced(&self, dq: f64, dp: f64) -> PyResult<Self> {
        Ok(PyMomentTable {
            inner: self.inner.displaced(dq, dp).map_err(err)?,
        })
    }

    fn centered(&self) -> PyResult<Self> {
        Ok(PyMomentTable {
            inner: self.inner.centered().map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "MomentTable(max_order={}, hbar={})",
            self.inner.max_order(),
            self.inner.hbar()
        )
    }
}

/// Weyl product of two polynomials given as `{(m, n): coefficient}`.
#[pyfunction]
#[pyo3(signature = (a, b, hbar = 1.0))]
fn weyl_product(
    a: BTreeMap<(u32, u32), C64>,
    b: BTreeMap<(u32, u32), C64>,
    hbar: f64,
) -> PyResult<BTreeMap<(u32, u32), C64>> {
    let p = core::weyl_product(&polynomial(a, hbar)?, &polynomial(b, hbar)?).map_err(err)?;
    Ok(terms_of(&p))
}

/// Monomials of `xi_J` in flat order.
#[pyfunction]
fn xi_vector(top: &str) -> PyResult<Vec<(u32, u32)>> {
    Ok(core::xi_vector(half(top)?)
        .entries()
        .iter()
        .map(|i| (i.m, i.n))
        .collect())
}

/// Spin-`j` representation of a unit-determinant 2x2 matrix.
#[pyfunction]
fn spin_rep(matrix: [[f64; 2]; 2], j: &str) -> PyResult<Vec<Vec<f64>>> {
    Ok(rows(
        &core::spin_rep(&symplectic(matrix)?, half(j)?).entries,
    ))
}

#[pyfunction]
#[pyo3(signature = (mean, covariance, max_order, hbar = 1.0))]
fn gaussian_moments(
    mean: [f64; 2],
    covariance: [[f64; 2]; 2],
    max_order: u32,
    hbar: f64,
) -> PyResult<PyMomentTable> {
    let g = core::GaussianState::new(mean, covariance).map_err(err)?;
    Ok(PyMomentTable {
        inner: core::gaussian_moments(&g, max_order, hbar).map_err(err)?,
    })
}

/// Moments of the Fock state `|n>`.
#[pyfunction]
#[pyo3(signature = (n, max_order, hbar = 1.0))]
fn fock_moments(n: usize, max_order: u32, hbar: f64) -> PyResult<PyMomentTable> {
    let rho = core::FockDensityMatrix::fock(n, n + 1).map_err(err)?;
    Ok(PyMomentTable {
        inner: core::moments_from_fock_dm(&rho, max_order, hbar).map_err(err)?,
    })
}

/// Moments of a density matrix given in the Fock basis.
#[pyfunction]
#[pyo3(signature = (rho, max_order, hbar = 1.0))]
fn moments_from_density_matrix(
    rho: Vec<Vec<C64>>,
    max_order: u32,
    hbar: f64,
) -> PyResult<PyMomentTable> {
    let n = rho.len();
    if rho.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("density matrix must be square"));
    }
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| rho[i][j]);
    let rho = core::FockDensityMatrix::new(m).map_err(err)?;
    Ok(PyMomentTable {
        inner: core::moments_from_fock_dm(&rho, max_order, hbar).map_err(err)?,
    })
}

/// Trapezoidal moments of `values[i][j] = W(q_i, p_j)`. Returns the
/// renormalized table, the raw integral of `W`, and the monomials whose
/// weight sits too close to the grid edge.
type GridResult = (PyMomentTable, f64, Vec<(u32, u32)>);

#[pyfunction]
#[pyo3(signature = (values, q_range, p_range, max_order, hbar = 1.0, strict = false))]
fn moments_from_grid(
    values: Vec<Vec<f64>>,
    q_range: (f64, f64),
    p_range: (f64, f64),
    max_order: u32,
    hbar: f64,
    strict: bool,
) -> PyResult<GridResult> {
    let nq = values.len();
    let np = values.first().map_or(0, Vec::len);
    if values.iter().any(|r| r.len() != np) {
        return Err(PyValueError::new_err("grid rows must have equal length"));
    }
    let grid = core::WignerGrid::new(q_range, p_range, nq, np, values.concat()).map_err(err)?;
    let opts = core::GridOptions {
        hbar,
        strict,
        ..core::GridOptions::default()
    };
    let out = core::moments_from_grid(&grid, max_order, opts).map_err(err)?;
    let limited = out.support_limited.iter().map(|i| (i.m, i.n)).collect();
    Ok((
        PyMomentTable { inner: out.table },
        out.raw_normalization,
        limited,
    ))
}

#[pyfunction]
fn transform_moments(table: &PyMomentTable, matrix: [[f64; 2]; 2]) -> PyResult<PyMomentTable> {
    Ok(PyMomentTable {
        inner: core::transform_moments(&table.inner, &symplectic(matrix)?).map_err(err)?,
    })
}

#[pyfunction]
fn build_moment_matrix(table: &PyMomentTable, top: &str) -> PyResult<Vec<Vec<C64>>> {
    Ok(rows(
        core::build_moment_matrix(&table.inner, half(top)?)
            .map_err(err)?
            .entries(),
    ))
}

/// Eigenvalue certification of `M_J >= 0`, as a dict.
#[pyfunction]
#[pyo3(signature = (table, top, tol = core::DEFAULT_PSD_TOL, residuals = false))]
fn check_psd<'py>(
    py: Python<'py>,
    table: &PyMomentTable,
    top: &str,
    tol: f64,
    residuals: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let m = core::build_moment_matrix(&table.inner, half(top)?).map_err(err)?;
    let report = core::check_psd(&m, tol).map_err(err)?;
    to_python(py, &report.to_json_value(residuals))
}

/// The nested Schur reduction of `M_J`: status, reporting level and the
/// residual block of every level.
#[pyfunction]
#[pyo3(signature = (table, top, tol = core::DEFAULT_PSD_TOL))]
fn schur_reduce<'py>(
    py: Python<'py>,
    table: &PyMomentTable,
    top: &str,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let m = core::build_moment_matrix(&table.inner, half(top)?).map_err(err)?;
    let chain = core::schur_reduce_with(&m, tol).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("status", chain.status.as_str())?;
    if let core::SchurStatus::PivotSingular { level } | core::SchurStatus::Violated { level } =
        chain.status
    {
        out.set_item("level", level)?;
    }
    out.set_item("verdict", chain.verdict().map(|v| v.as_str()))?;
    let levels = chain
        .levels
        .iter()
        .map(|l| {
            let d = PyDict::new(py);
            d.set_item("level", l.level)?;
            d.set_item("min_eig", l.min_eigenvalue)?;
            d.set_item("residual", rows(&l.residual))?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    out.set_item("conditions", levels)?;
    Ok(out)
}

/// `<A^2><B^2> - <{A,B}/2>^2 - <[A,B]/2i>^2` for hermitian polynomials.
#[pyfunction]
fn schwartz_residual(
    table: &PyMomentTable,
    a: BTreeMap<(u32, u32), C64>,
    b: BTreeMap<(u32, u32), C64>,
) -> PyResult<f64> {
    let h = table.inner.hbar();
    core::schwartz_residual(&table.inner, &polynomial(a, h)?, &polynomial(b, h)?).map_err(err)
}

/// Largest `J` whose whole ladder of moment matrices passes, as a string.
#[pyfunction]
#[pyo3(signature = (table, tol = core::DEFAULT_PSD_TOL))]
fn max_certified_order(table: &PyMomentTable, tol: f64) -> PyResult<Option<String>> {
    Ok(core::max_certified_order(&table.inner, tol)
        .map_err(err)?
        .top
        .map(|j| j.to_string()))
}

/// Hankel matrix of `gamma_0..gamma_2k` and its smallest eigenvalue.
#[pyfunction]
fn hankel(gamma: Vec<f64>) -> PyResult<(Vec<Vec<f64>>, f64)> {
    let h = core::hankel_matrix(&gamma).map_err(err)?;
    Ok((rows(&h), core::hankel_min_eigenvalue(&gamma).map_err(err)?))
}

#[pymodule]
#[pyo3(name = "wigner_gup")]
fn wigner_gup_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMomentTable>()?;
    m.add_function(wrap_pyfunction!(weyl_product, m)?)?;
    m.add_function(wrap_pyfunction!(xi_vector, m)?)?;
    m.add_function(wrap_pyfunction!(spin_rep, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_moments, m)?)?;
    m.add_function(wrap_pyfunction!(fock_moments, m)?)?;
    m.add_function(wrap_pyfunction!(moments_from_density_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(moments_from_grid, m)?)?;
    m.add_function(wrap_pyfunction!(transform_moments, m)?)?;
    m.add_function(wrap_pyfunction!(build_moment_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(check_psd, m)?)?;
    m.add_function(wrap_pyfunction!(schur_reduce, m)?)?;
    m.add_function(wrap_pyfunction!(schwartz_residual, m)?)?;
    m.add_function(wrap_pyfunction!(max_certified_order, m)?)?;
    m.add_function(wrap_pyfunction!(hankel, m)?)?;
    Ok(())
}
