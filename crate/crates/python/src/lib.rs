//! Python bindings: cocycles, moduli of continuity, exponents and return statistics.
//!
//! Structured results come back as plain dicts.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use shiftcocycle::cocycle::{self, LocallyConstantCocycle};
use shiftcocycle::mat2::{self, Mat2};
use shiftcocycle::modulus::{self, ModulusSpec};
use shiftcocycle::shift::{make_wk, make_zk, Cylinder, LazyPoint};
use shiftcocycle::{exponent, induction, Error};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_) | Error::Config(_) | Error::Unsupported(_) | Error::Json(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn rows(m: &Mat2) -> [[f64; 2]; 2] {
    (*m).into()
}

fn spec(s: &str) -> PyResult<ModulusSpec> {
    s.parse().map_err(to_py)
}

/// A locally constant SL(2,R) cocycle over the full 2-shift.
#[pyclass(name = "Cocycle", module = "shiftcocycle_py", frozen)]
struct PyCocycle {
    inner: LocallyConstantCocycle,
}

#[pymethods]
impl PyCocycle {
    /// A_{ση}: diag(σ, 1/σ) on x_0 = 1, diag(1/η, η) on x_0 = 0.
    #[staticmethod]
    fn a_sigma_eta(sigma: f64, eta: f64) -> PyResult<Self> {
        Ok(Self { inner: cocycle::build_a_sigma_eta(sigma, eta).map_err(to_py)? })
    }

    #[staticmethod]
    fn a_sigma_1(sigma: f64) -> PyResult<Self> {
        Ok(Self { inner: cocycle::build_a_sigma_1(sigma).map_err(to_py)? })
    }

    #[staticmethod]
    fn bk(sigma: f64, k: usize) -> PyResult<Self> {
        Ok(Self { inner: cocycle::build_bk(sigma, k).map_err(to_py)? })
    }

    #[staticmethod]
    fn lk(sigma: f64, k: usize, beta: f64) -> PyResult<Self> {
        Ok(Self { inner: cocycle::build_lk(sigma, k, beta).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))? })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn window(&self) -> (i64, i64) {
        self.inner.window()
    }

    /// Value on a point whose window coordinates are `word` (symbols 0/1, lo..=hi).
    fn evaluate_word(&self, word: Vec<u8>) -> PyResult<[[f64; 2]; 2]> {
        Ok(rows(&self.inner.evaluate_word(&word).map_err(to_py)?))
    }

    /// (ln‖A^n(x)‖, A^n(x)/‖A^n(x)‖) for the Bernoulli(p) point with the given seed.
    fn iterate(&self, py: Python<'_>, seed: u64, p: f64, n: i64) -> PyResult<(f64, [[f64; 2]; 2])> {
        let prod = py
            .detach(|| {
                let x = LazyPoint::bernoulli(seed, p)?;
                self.inner.iterate(&x, n)
            })
            .map_err(to_py)?;
        Ok((prod.log_norm(), rows(&prod.unit())))
    }

    /// Exchange angles of A^n(x) for x drawn from μ_p conditioned on the cylinder [base; word].
    fn exchange<'py>(&self, py: Python<'py>, base: i64, word: &str, seed: u64, p: f64, n: u64) -> PyResult<Bound<'py, PyAny>> {
        let c = Cylinder::parse(base, word).map_err(to_py)?;
        let x = LazyPoint::in_cylinder(seed, p, &c).map_err(to_py)?;
        let e = cocycle::exchange_check(&self.inner, &x, n).map_err(to_py)?;
        to_dict(py, &e)
    }

    fn __repr__(&self) -> String {
        format!("Cocycle({:?}, window={:?})", self.inner.name(), self.inner.window())
    }
}

/// Operator norm of a 2×2 matrix.
#[pyfunction]
fn op_norm(m: [[f64; 2]; 2]) -> f64 {
    mat2::op_norm(&Mat2::from(m))
}

/// Weight of a modulus (`c0`, `holder:α`, `weak:α,θ`, `loglog:γ,κ`, `log:δ`) at distance ρ^n.
#[pyfunction]
fn weight(spec_text: &str, n: u64, rho: f64) -> PyResult<f64> {
    Ok(modulus::weight(&spec(spec_text)?, n, rho))
}

/// Exact ‖F − G‖ in the given modulus topology.
#[pyfunction]
fn norm_distance<'py>(py: Python<'py>, f: &PyCocycle, g: &PyCocycle, spec_text: &str, rho: f64) -> PyResult<Bound<'py, PyAny>> {
    let s = spec(spec_text)?;
    let d = py.detach(|| modulus::norm_distance(&f.inner, &g.inner, &s, rho)).map_err(to_py)?;
    to_dict(py, &d)
}

#[pyfunction]
fn analytic_bk_bound(k: usize, sigma: f64, delta: f64, rho: f64) -> PyResult<f64> {
    modulus::analytic_bk_bound(k, sigma, delta, rho).map_err(to_py)
}

#[pyfunction]
fn analytic_lk_cases<'py>(py: Python<'py>, k: usize, sigma: f64, beta: f64, delta: f64, rho: f64) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &modulus::analytic_lk_cases(k, sigma, beta, delta, rho).map_err(to_py)?)
}

#[pyfunction]
fn lyap_closed_form(sigma: f64, eta: f64, p: f64) -> PyResult<f64> {
    Ok(exponent::lyap_diag_closed_form(sigma, eta, p).map_err(to_py)?.value)
}

#[pyfunction]
fn critical_weight(sigma: f64, eta: f64) -> PyResult<f64> {
    exponent::critical_weight(sigma, eta).map_err(to_py)
}

/// Monte Carlo top and bottom exponents.
#[pyfunction]
fn lyap_mc<'py>(py: Python<'py>, f: &PyCocycle, p: f64, n: u64, trials: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let (top, bottom) = py.detach(|| exponent::lyap_both_mc(&f.inner, p, n, trials, seed)).map_err(to_py)?;
    to_dict(py, &serde_json::json!({"top": top, "bottom": bottom}))
}

fn pattern(kind: &str, k: usize) -> PyResult<Cylinder> {
    match kind {
        "z" => make_zk(k).map_err(to_py),
        "w" => make_wk(k).map_err(to_py),
        _ => Err(PyValueError::new_err(format!("cylinder must be 'z' or 'w', got {kind:?}"))),
    }
}

/// Induced-estimator exponent over Z_k (`"z"`) or W_k (`"w"`).
#[pyfunction]
#[pyo3(signature = (f, cylinder, k, sigma, p, trials, j_max, seed, cap = 10_000_000_000))]
#[allow(clippy::too_many_arguments)]
fn lyap_induced<'py>(
    py: Python<'py>,
    f: &PyCocycle,
    cylinder: &str,
    k: usize,
    sigma: f64,
    p: f64,
    trials: usize,
    j_max: usize,
    seed: u64,
    cap: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let c = pattern(cylinder, k)?;
    let e = py
        .detach(|| exponent::lyap_induced(&f.inner, &c, sigma, p, trials, j_max, seed, cap))
        .map_err(to_py)?;
    to_dict(py, &e)
}

/// |c_j|/m_j statistics on a grid of j.
#[pyfunction]
#[pyo3(signature = (f, cylinder, k, sigma, p, trials, grid, seed, cap = 10_000_000_000))]
#[allow(clippy::too_many_arguments)]
fn cj_decay<'py>(
    py: Python<'py>,
    f: &PyCocycle,
    cylinder: &str,
    k: usize,
    sigma: f64,
    p: f64,
    trials: usize,
    grid: Vec<usize>,
    seed: u64,
    cap: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let c = pattern(cylinder, k)?;
    let d = py
        .detach(|| induction::cj_decay(&f.inner, &c, sigma, p, trials, &grid, seed, cap))
        .map_err(to_py)?;
    to_dict(py, &d)
}

/// Return-time statistics over Z_k or W_k against Kac's formula.
#[pyfunction]
#[pyo3(signature = (cylinder, k, p, trials, j_max, seed, cap = 10_000_000_000))]
#[allow(clippy::too_many_arguments)]
fn kac_birkhoff<'py>(
    py: Python<'py>,
    cylinder: &str,
    k: usize,
    p: f64,
    trials: usize,
    j_max: usize,
    seed: u64,
    cap: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let c = pattern(cylinder, k)?;
    let r = py.detach(|| induction::kac_birkhoff(&c, p, trials, j_max, seed, cap)).map_err(to_py)?;
    to_dict(py, &r)
}

#[pymodule]
fn shiftcocycle_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCocycle>()?;
    m.add_function(wrap_pyfunction!(op_norm, m)?)?;
    m.add_function(wrap_pyfunction!(weight, m)?)?;
    m.add_function(wrap_pyfunction!(norm_distance, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_bk_bound, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_lk_cases, m)?)?;
    m.add_function(wrap_pyfunction!(lyap_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(critical_weight, m)?)?;
    m.add_function(wrap_pyfunction!(lyap_mc, m)?)?;
    m.add_function(wrap_pyfunction!(lyap_induced, m)?)?;
    m.add_function(wrap_pyfunction!(cj_decay, m)?)?;
    m.add_function(wrap_pyfunction!(kac_birkhoff, m)?)?;
    Ok(())
}
