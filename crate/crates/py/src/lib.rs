//! Python bindings. Structured results come back as plain dicts and lists.

use limitval::canonical::RESIDUAL_CAP;
use limitval::{
    behavioral_certificate, best_reply_p2, check_asymptotic_optimality, default_grid, discounted_value, dyadic_grid,
    estimate_limit, evaluate, fit_asymptotic_strategy_with, standard_sequences, sweep_with, FitConfig,
    StationaryStrategy, SweepOptions,
};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::Serialize;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_error(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn to_py(py: Python<'_>, value: &impl Serialize) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(runtime_error)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn strategy(rows: Vec<Vec<f64>>) -> PyResult<StationaryStrategy> {
    StationaryStrategy::new(rows).map_err(value_error)
}

/// A finite zero-sum stochastic game with payoffs in [0, 1].
#[pyclass(name = "Game", module = "pylimitval", frozen)]
struct PyGame {
    inner: limitval::Game,
}

#[pymethods]
impl PyGame {
    #[staticmethod]
    #[pyo3(signature = (text, rescale = false))]
    fn from_json(text: &str, rescale: bool) -> PyResult<Self> {
        let (inner, _) = limitval::Game::from_json_with(text, rescale).map_err(value_error)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn random(states: usize, p1_actions: usize, p2_actions: usize, seed: u64) -> PyResult<Self> {
        let inner = limitval::Game::random(states, p1_actions, p2_actions, seed).map_err(value_error)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn num_states(&self) -> usize {
        self.inner.num_states()
    }

    #[pyo3(signature = (lam, tol = 1e-9))]
    fn solve(&self, py: Python<'_>, lam: f64, tol: f64) -> PyResult<Py<PyAny>> {
        let sol = discounted_value(&self.inner, lam, tol).map_err(value_error)?;
        to_py(py, &sol)
    }

    /// Sweeps the default 24-point dyadic grid unless `grid` is given.
    #[pyo3(signature = (grid = None, tol = 1e-9, jobs = None))]
    fn sweep(&self, grid: Option<Vec<f64>>, tol: f64, jobs: Option<usize>) -> PyResult<PySweepTable> {
        let grid = grid.unwrap_or_else(default_grid);
        let options = SweepOptions {
            tol,
            jobs,
            ..SweepOptions::default()
        };
        let inner = sweep_with(&self.inner, &grid, &options).map_err(value_error)?;
        Ok(PySweepTable { inner })
    }

    fn evaluate(&self, x: Vec<Vec<f64>>, y: Vec<Vec<f64>>, lam: f64) -> PyResult<Vec<f64>> {
        evaluate(&self.inner, &strategy(x)?, &strategy(y)?, lam).map_err(value_error)
    }

    fn best_reply(&self, py: Python<'_>, x: Vec<Vec<f64>>, lam: f64) -> PyResult<Py<PyAny>> {
        let br = best_reply_p2(&self.inner, &strategy(x)?, lam).map_err(value_error)?;
        to_py(py, &br)
    }
}

#[pyclass(name = "SweepTable", module = "pylimitval", frozen)]
struct PySweepTable {
    inner: limitval::SweepTable,
}

#[pymethods]
impl PySweepTable {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn lambdas(&self) -> Vec<f64> {
        self.inner.rows.iter().map(|r| r.lambda).collect()
    }

    #[getter]
    fn values(&self) -> Vec<Vec<f64>> {
        self.inner.rows.iter().map(|r| r.values.clone()).collect()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(runtime_error)
    }

    #[pyo3(signature = (threshold = limitval::limit_value::DEFAULT_OSCILLATION_THRESHOLD))]
    fn estimate_limit(&self, py: Python<'_>, threshold: f64) -> PyResult<Py<PyAny>> {
        let report = estimate_limit(&self.inner, threshold).map_err(value_error)?;
        to_py(py, &report)
    }
}

/// `x_λ(a) = c(a) λ^{e(a)}` per state-action pair.
#[pyclass(name = "CanonicalStrategy", module = "pylimitval", frozen)]
struct PyCanonical {
    inner: limitval::CanonicalStrategy,
}

#[pymethods]
impl PyCanonical {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = limitval::CanonicalStrategy::from_json(text).map_err(value_error)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_rows(c: Vec<Vec<f64>>, e: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = limitval::CanonicalStrategy::from_rows(c, e).map_err(value_error)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn coefficients(&self) -> Vec<f64> {
        self.inner.coefficients().to_vec()
    }

    #[getter]
    fn exponents(&self) -> Vec<f64> {
        self.inner.exponents().to_vec()
    }

    fn instantiate(&self, lam: f64) -> Vec<Vec<f64>> {
        self.inner.instantiate(lam).rows().to_vec()
    }
}

#[pyfunction]
#[pyo3(signature = (game, table, residual_cap = RESIDUAL_CAP))]
fn fit_asymptotic_strategy(game: &PyGame, table: &PySweepTable, residual_cap: f64) -> PyResult<PyCanonical> {
    let fit = fit_asymptotic_strategy_with(&game.inner, &table.inner, &FitConfig::default(), residual_cap)
        .map_err(runtime_error)?;
    Ok(PyCanonical {
        inner: fit.fit.strategy,
    })
}

#[pyfunction]
#[pyo3(signature = (game, xc, v_star, epsilon = 0.05, grid = None, jobs = None))]
fn check_asymptotic(
    py: Python<'_>,
    game: &PyGame,
    xc: &PyCanonical,
    v_star: Vec<f64>,
    epsilon: f64,
    grid: Option<Vec<f64>>,
    jobs: Option<usize>,
) -> PyResult<Py<PyAny>> {
    let grid = grid.unwrap_or_else(default_grid);
    let cert = check_asymptotic_optimality(&game.inner, &xc.inner, &v_star, epsilon, &grid, jobs)
        .map_err(value_error)?;
    to_py(py, &cert)
}

#[pyfunction]
#[pyo3(signature = (game, xc, v_star, tolerance = 1e-3, seed = 0))]
fn behavioral(
    py: Python<'_>,
    game: &PyGame,
    xc: &PyCanonical,
    v_star: Vec<f64>,
    tolerance: f64,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let cert = behavioral_certificate(&game.inner, &xc.inner, &v_star, &standard_sequences(seed), tolerance)
        .map_err(value_error)?;
    to_py(py, &cert)
}

#[pyfunction(name = "default_grid")]
fn py_default_grid() -> Vec<f64> {
    default_grid()
}

#[pyfunction(name = "dyadic_grid")]
fn py_dyadic_grid(first: i32, last: i32) -> Vec<f64> {
    dyadic_grid(first, last)
}

#[pymodule]
fn pylimitval(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGame>()?;
    m.add_class::<PySweepTable>()?;
    m.add_class::<PyCanonical>()?;
    m.add_function(wrap_pyfunction!(fit_asymptotic_strategy, m)?)?;
    m.add_function(wrap_pyfunction!(check_asymptotic, m)?)?;
    m.add_function(wrap_pyfunction!(behavioral, m)?)?;
    m.add_function(wrap_pyfunction!(py_default_grid, m)?)?;
    m.add_function(wrap_pyfunction!(py_dyadic_grid, m)?)?;
    Ok(())
}
