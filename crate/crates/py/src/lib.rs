//! Python bindings: model parameters, lattice instances, the grid and exact dynamic
//! programs, and the Monte Carlo estimators.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use shortfall_core::demos;
use shortfall_core::diagnostics;
use shortfall_core::dp::{self, Bound as GridBound, DpConfig, Precision};
use shortfall_core::kernel::{DriftFunctional, Measure};
use shortfall_core::mc::{self, McConfig, McEstimate};
use shortfall_core::model;
use shortfall_core::Error as CoreError;

fn to_py(e: CoreError) -> PyErr {
    match e {
        CoreError::InvalidParam { .. }
        | CoreError::Feller { .. }
        | CoreError::OffGrid { .. }
        | CoreError::TooManySteps { .. }
        | CoreError::Precondition(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = String>>(s: &str) -> PyResult<T> {
    s.parse().map_err(PyValueError::new_err)
}

/// Heston model parameters. Every argument defaults to the reference set.
#[pyclass(name = "HestonParams", from_py_object)]
#[derive(Clone, Copy)]
struct PyHestonParams(model::HestonParams);

#[pymethods]
impl PyHestonParams {
    #[new]
    #[pyo3(signature = (*, mu=None, kappa=None, theta=None, sigma=None, rho=None, s0=None, nu0=None, maturity=None, strike=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        mu: Option<f64>,
        kappa: Option<f64>,
        theta: Option<f64>,
        sigma: Option<f64>,
        rho: Option<f64>,
        s0: Option<f64>,
        nu0: Option<f64>,
        maturity: Option<f64>,
        strike: Option<f64>,
    ) -> PyResult<Self> {
        let r = model::HestonParams::reference();
        let p = model::HestonParams {
            mu: mu.unwrap_or(r.mu),
            kappa: kappa.unwrap_or(r.kappa),
            theta: theta.unwrap_or(r.theta),
            sigma: sigma.unwrap_or(r.sigma),
            rho: rho.unwrap_or(r.rho),
            s0: s0.unwrap_or(r.s0),
            nu0: nu0.unwrap_or(r.nu0),
            maturity: maturity.unwrap_or(r.maturity),
            strike: strike.unwrap_or(r.strike),
        };
        p.validate().map_err(to_py)?;
        Ok(Self(p))
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.0.mu
    }
    #[getter]
    fn kappa(&self) -> f64 {
        self.0.kappa
    }
    #[getter]
    fn theta(&self) -> f64 {
        self.0.theta
    }
    #[getter]
    fn sigma(&self) -> f64 {
        self.0.sigma
    }
    #[getter]
    fn rho(&self) -> f64 {
        self.0.rho
    }
    #[getter]
    fn s0(&self) -> f64 {
        self.0.s0
    }
    #[getter]
    fn nu0(&self) -> f64 {
        self.0.nu0
    }
    #[getter]
    fn maturity(&self) -> f64 {
        self.0.maturity
    }
    #[getter]
    fn strike(&self) -> f64 {
        self.0.strike
    }

    /// `2 kappa theta / sigma^2 - 1`.
    fn feller_exponent(&self) -> f64 {
        self.0.feller_exponent()
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

/// Volatility clamp `[sigma_lo, sigma_hi]`.
#[pyclass(name = "TruncationBounds", from_py_object)]
#[derive(Clone, Copy)]
struct PyBounds(model::TruncationBounds);

#[pymethods]
impl PyBounds {
    #[new]
    #[pyo3(signature = (sigma_lo=1e-4, sigma_hi=1.0))]
    fn new(sigma_lo: f64, sigma_hi: f64) -> PyResult<Self> {
        model::TruncationBounds::new(sigma_lo, sigma_hi).map(Self).map_err(to_py)
    }

    #[getter]
    fn sigma_lo(&self) -> f64 {
        self.0.sigma_lo
    }
    #[getter]
    fn sigma_hi(&self) -> f64 {
        self.0.sigma_hi
    }

    fn clamp(&self, z: f64) -> f64 {
        self.0.clamp(z)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

/// A lattice with `n` steps over the given model and clamp.
#[pyclass(name = "Instance", from_py_object)]
#[derive(Clone, Copy)]
struct PyInstance(model::Instance);

#[pymethods]
impl PyInstance {
    #[new]
    #[pyo3(signature = (n, params=None, bounds=None, sigma_tilde=5.0))]
    fn new(n: usize, params: Option<PyHestonParams>, bounds: Option<PyBounds>, sigma_tilde: f64) -> PyResult<Self> {
        let params = params.map_or_else(model::HestonParams::reference, |p| p.0);
        let bounds = bounds.map_or_else(model::TruncationBounds::reference, |b| b.0);
        model::Instance::new(params, bounds, n, sigma_tilde).map(Self).map_err(to_py)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }
    /// Log-price step `a = sigma_tilde sqrt(T / n)`.
    #[getter]
    fn step(&self) -> f64 {
        self.0.lattice.step
    }
    #[getter]
    fn params(&self) -> PyHestonParams {
        PyHestonParams(self.0.params)
    }
    #[getter]
    fn bounds(&self) -> PyBounds {
        PyBounds(self.0.bounds)
    }

    /// Price at log-price index `i`.
    fn price(&self, i: i32) -> f64 {
        self.0.price(i)
    }

    fn __repr__(&self) -> String {
        format!("Instance(n={}, step={})", self.0.n(), self.0.lattice.step)
    }
}

fn estimate_dict<'py>(py: Python<'py>, e: &McEstimate) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("mean", e.mean)?;
    d.set_item("stderr", e.stderr)?;
    d.set_item("paths", e.paths)?;
    d.set_item("seed", e.seed)?;
    Ok(d)
}

/// Root value function of the grid program, one entry per proportion `l / m`.
#[pyfunction]
#[pyo3(signature = (inst, m, bound="minus", projection="ps1", precision="f64"))]
fn dp_grid_root(py: Python<'_>, inst: PyInstance, m: usize, bound: &str, projection: &str, precision: &str) -> PyResult<Vec<f64>> {
    let mut cfg = DpConfig::new(m, parse::<GridBound>(bound)?).with_projection(parse(projection)?);
    cfg.precision = parse::<Precision>(precision)?;
    let slice = py.detach(|| dp::dp_grid(&inst.0, &cfg)).map_err(to_py)?;
    Ok(slice.column(0, 0))
}

/// Lower and upper grid bounds at capital `x`, which must satisfy `x / s0 = l / m`.
#[pyfunction]
#[pyo3(signature = (inst, m, x, projection="ps1"))]
fn sandwich(py: Python<'_>, inst: PyInstance, m: usize, x: f64, projection: &str) -> PyResult<(f64, f64)> {
    let proj = parse(projection)?;
    let s = py.detach(|| dp::sandwich_at(&inst.0, m, x, proj)).map_err(to_py)?;
    Ok((s.j_minus, s.j_plus))
}

/// Exact root value at proportions `lambdas`, for lattices of at most eight steps.
#[pyfunction]
#[pyo3(signature = (inst, lambdas, projection="ps1"))]
fn exact_value(py: Python<'_>, inst: PyInstance, lambdas: Vec<f64>, projection: &str) -> PyResult<Vec<f64>> {
    let proj = parse(projection)?;
    let f = py.detach(|| dp::dp_exact_pwl(&inst.0, proj)).map_err(to_py)?;
    Ok(lambdas.iter().map(|x| f.eval(*x)).collect())
}

/// Lattice value of holding the capital `x` without trading.
#[pyfunction]
#[pyo3(signature = (inst, x, projection="ps1"))]
fn unhedged_value(py: Python<'_>, inst: PyInstance, x: f64, projection: &str) -> PyResult<f64> {
    let proj = parse(projection)?;
    py.detach(|| dp::unhedged_value(&inst.0, proj, x)).map_err(to_py)
}

/// Physical law of the terminal log-price index, as `(prices, probabilities)`.
#[pyfunction]
#[pyo3(signature = (inst, projection="ps1", upsilon=None))]
fn terminal_law(py: Python<'_>, inst: PyInstance, projection: &str, upsilon: Option<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let proj = parse(projection)?;
    let measure = upsilon.map_or(Measure::Physical, |u| Measure::Martingale(DriftFunctional::constant(u)));
    let pmf = py.detach(|| diagnostics::terminal_pmf(&inst.0, &measure, proj)).map_err(to_py)?;
    let n = inst.0.n() as i32;
    let prices = (0..pmf.len()).map(|k| inst.0.price(k as i32 - n)).collect();
    Ok((prices, pmf))
}

/// `E_Q[(dP/dQ)^q]` for the martingale measure with constant drift `upsilon`.
#[pyfunction]
#[pyo3(signature = (inst, q=2.0, upsilon=0.0, projection="ps1"))]
fn density_moment(py: Python<'_>, inst: PyInstance, q: f64, upsilon: f64, projection: &str) -> PyResult<f64> {
    let proj = parse(projection)?;
    py.detach(|| diagnostics::density_moment(&inst.0, &DriftFunctional::constant(upsilon), q, proj))
        .map_err(to_py)
}

/// Kernel sweep under the physical measure: node counts and identity residuals.
#[pyfunction]
#[pyo3(signature = (inst, projection="ps1"))]
fn kernel_report<'py>(py: Python<'py>, inst: PyInstance, projection: &str) -> PyResult<Bound<'py, PyDict>> {
    let proj = parse(projection)?;
    let r = py
        .detach(|| diagnostics::kernel_sweep(&inst.0, &Measure::Physical, proj))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("nodes_total", r.nodes_total)?;
    d.set_item("projected_xi", r.projected_xi)?;
    d.set_item("projected_xihat", r.projected_xihat)?;
    d.set_item("max_sum_error", r.max_sum_error)?;
    d.set_item("max_moment_residual", r.max_moment_residual)?;
    d.set_item("projected_mass", r.projected_mass)?;
    Ok(d)
}

/// Monte Carlo unhedged value of the clamped model at each capital in `xs`.
#[pyfunction]
#[pyo3(signature = (xs, params=None, bounds=None, paths=100_000, dt=1e-3, seed=1))]
fn mc_unhedged<'py>(
    py: Python<'py>,
    xs: Vec<f64>,
    params: Option<PyHestonParams>,
    bounds: Option<PyBounds>,
    paths: usize,
    dt: f64,
    seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let p = params.map_or_else(model::HestonParams::reference, |p| p.0);
    let b = bounds.map_or_else(model::TruncationBounds::reference, |b| b.0);
    let cfg = McConfig::new(paths, dt, seed);
    let est = py.detach(|| mc::mc_unhedged_many(&p, &b, &cfg, &xs)).map_err(to_py)?;
    est.iter().map(|e| estimate_dict(py, e)).collect()
}

/// Probability that the raw volatility leaves `(sigma_lo, sigma_hi)` before maturity,
/// for each upper barrier.
#[pyfunction]
#[pyo3(signature = (sigma_his, sigma_lo=1e-4, params=None, paths=100_000, dt=1e-3, seed=1))]
fn exit_probabilities<'py>(
    py: Python<'py>,
    sigma_his: Vec<f64>,
    sigma_lo: f64,
    params: Option<PyHestonParams>,
    paths: usize,
    dt: f64,
    seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let p = params.map_or_else(model::HestonParams::reference, |p| p.0);
    let cfg = McConfig::new(paths, dt, seed);
    let stats = py
        .detach(|| mc::exit_stats_ladder(&p, sigma_lo, &sigma_his, &cfg))
        .map_err(to_py)?;
    stats
        .iter()
        .map(|s| {
            let d = PyDict::new(py);
            d.set_item("sigma_hi", s.sigma_hi)?;
            d.set_item("p_exit", estimate_dict(py, &s.p_exit)?)?;
            d.set_item("p_no_exit", estimate_dict(py, &s.p_no_exit)?)?;
            Ok(d)
        })
        .collect()
}

/// Value of the replicating strategy in the non-concave utility example; `3/2` for
/// every `n`.
#[pyfunction]
fn nonconcave_value(n: usize) -> PyResult<f64> {
    demos::nonconcave_value(n).map(|r| r.value).map_err(to_py)
}

/// `(estimate, stderr, T^2/n)` for the squared covariation of two sign walks.
#[pyfunction]
#[pyo3(signature = (n, maturity=1.0, paths=100_000, seed=1))]
fn covariation(py: Python<'_>, n: usize, maturity: f64, paths: usize, seed: u64) -> PyResult<(f64, f64, f64)> {
    let r = py
        .detach(|| demos::kais_covariation(n, maturity, paths, seed))
        .map_err(to_py)?;
    Ok((r.second_moment.mean, r.second_moment.stderr, r.target))
}

#[pymodule]
fn shortfall(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyHestonParams>()?;
    m.add_class::<PyBounds>()?;
    m.add_class::<PyInstance>()?;
    m.add_function(wrap_pyfunction!(dp_grid_root, m)?)?;
    m.add_function(wrap_pyfunction!(sandwich, m)?)?;
    m.add_function(wrap_pyfunction!(exact_value, m)?)?;
    m.add_function(wrap_pyfunction!(unhedged_value, m)?)?;
    m.add_function(wrap_pyfunction!(terminal_law, m)?)?;
    m.add_function(wrap_pyfunction!(density_moment, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_report, m)?)?;
    m.add_function(wrap_pyfunction!(mc_unhedged, m)?)?;
    m.add_function(wrap_pyfunction!(exit_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(nonconcave_value, m)?)?;
    m.add_function(wrap_pyfunction!(covariation, m)?)?;
    Ok(())
}
