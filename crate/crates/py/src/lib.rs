//! Python bindings for the mode-curve pipeline: expression parsing, SDE
//! simulation, per-slice density estimation, and the closed-form references.
//! Built as a cdylib; load it with `importlib` (see python/smoke_test.py).

use mppp_core::density::{self, BandwidthRule, KdeConfig};
use mppp_core::expr;
use mppp_core::mppp::{self, MpppCurve, MpppReport, OracleSpec};
use mppp_core::oracle::{self, AdditiveLinearParams, GbmParams, Rotation2dParams};
use mppp_core::rng::DEFAULT_MASTER_SEED;
use mppp_core::sim::{self, PathEnsemble, SdeSystem, SimGrid};
use pyo3::exceptions::{PyIndexError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A drift or diffusion coefficient expression.
#[pyclass(name = "Expr", frozen)]
struct PyExpr(expr::Expr);

#[pymethods]
impl PyExpr {
    #[new]
    fn new(source: &str) -> PyResult<Self> {
        expr::parse(source).map(PyExpr).map_err(value_err)
    }

    /// Evaluates at a state vector and time.
    fn eval(&self, state: Vec<f64>, t: f64) -> PyResult<f64> {
        let b = expr::Bindings::new(&state, t);
        self.0.eval(&b).map_err(value_err)
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Expr({:?})", self.0.to_string())
    }
}

/// An SDE: per-coordinate drift and diffusion expressions plus the start.
#[pyclass(name = "SdeSystem", frozen)]
struct PySdeSystem(SdeSystem);

#[pymethods]
impl PySdeSystem {
    #[new]
    #[pyo3(signature = (dim, drift, diffusion, initial, label = "custom"))]
    fn new(
        dim: usize,
        drift: Vec<String>,
        diffusion: Vec<String>,
        initial: Vec<f64>,
        label: &str,
    ) -> PyResult<Self> {
        let parse_all = |texts: &[String]| -> PyResult<Vec<expr::Expr>> {
            texts
                .iter()
                .map(|t| expr::parse(t).map_err(value_err))
                .collect()
        };
        SdeSystem::new(
            dim,
            parse_all(&drift)?,
            parse_all(&diffusion)?,
            initial,
            label,
        )
        .map(PySdeSystem)
        .map_err(value_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn label(&self) -> String {
        self.0.label().to_string()
    }

    #[getter]
    fn initial_state(&self) -> Vec<f64> {
        self.0.initial_state().to_vec()
    }
}

/// Discretization: horizon, step count, path count, master seed.
#[pyclass(name = "SimGrid", frozen)]
struct PySimGrid(SimGrid);

#[pymethods]
impl PySimGrid {
    #[new]
    #[pyo3(signature = (t, n, m, seed = DEFAULT_MASTER_SEED))]
    fn new(t: f64, n: usize, m: usize, seed: u64) -> PyResult<Self> {
        SimGrid::new(t, n, m, seed)
            .map(PySimGrid)
            .map_err(value_err)
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.0.horizon
    }

    #[getter]
    fn n_steps(&self) -> usize {
        self.0.n_steps
    }

    #[getter]
    fn n_paths(&self) -> usize {
        self.0.n_paths
    }

    #[getter]
    fn master_seed(&self) -> u64 {
        self.0.master_seed
    }

    fn dt(&self) -> f64 {
        self.0.dt()
    }

    fn time_at(&self, j: usize) -> f64 {
        self.0.time_at(j)
    }
}

/// Density estimation settings.
#[pyclass(name = "KdeConfig", frozen)]
struct PyKdeConfig(KdeConfig);

#[pymethods]
impl PyKdeConfig {
    #[new]
    #[pyo3(signature = (n_grid = 100, bandwidth = None, grid_pad = 3.0, refine = false))]
    fn new(n_grid: usize, bandwidth: Option<f64>, grid_pad: f64, refine: bool) -> Self {
        let bandwidth_rule = match bandwidth {
            Some(h) => BandwidthRule::Fixed(h),
            None => BandwidthRule::SilvermanNormalReference,
        };
        PyKdeConfig(KdeConfig {
            n_grid,
            bandwidth_rule,
            grid_pad,
            refine_mode: refine,
        })
    }
}

/// One time slice's estimated density over its evaluation grid.
#[pyclass(name = "DensityEstimate", frozen)]
struct PyDensityEstimate(density::DensityEstimate);

#[pymethods]
impl PyDensityEstimate {
    #[getter]
    fn grid(&self) -> Vec<f64> {
        self.0.grid.clone()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values.clone()
    }

    #[getter]
    fn bandwidth(&self) -> f64 {
        self.0.bandwidth
    }

    #[getter]
    fn n_samples(&self) -> usize {
        self.0.n_samples
    }

    /// Grid argmax (smallest grid point on ties).
    fn mode(&self) -> f64 {
        density::mode_of(&self.0)
    }
}

/// A simulated ensemble, path-major.
#[pyclass(name = "PathEnsemble", frozen)]
struct PyPathEnsemble(PathEnsemble);

#[pymethods]
impl PyPathEnsemble {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.0.times().to_vec()
    }

    #[getter]
    fn n_paths(&self) -> usize {
        self.0.n_paths()
    }

    #[getter]
    fn n_steps(&self) -> usize {
        self.0.n_steps()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn diverged_count(&self) -> usize {
        self.0.diverged_count()
    }

    /// State of path `m` at slice `j`.
    fn state(&self, m: usize, j: usize) -> PyResult<Vec<f64>> {
        if m >= self.0.n_paths() || j > self.0.n_steps() {
            return Err(PyIndexError::new_err("path or step out of range"));
        }
        Ok(self.0.state(m, j).to_vec())
    }

    /// All paths' coordinate `coord` at slice `j`, in path order.
    fn slice_component(&self, j: usize, coord: usize) -> PyResult<Vec<f64>> {
        if j > self.0.n_steps() || coord >= self.0.dim() {
            return Err(PyIndexError::new_err("step or coordinate out of range"));
        }
        Ok(self.0.slice_component(j, coord))
    }

    fn is_path_diverged(&self, m: usize) -> PyResult<bool> {
        if m >= self.0.n_paths() {
            return Err(PyIndexError::new_err("path out of range"));
        }
        Ok(self.0.is_path_diverged(m))
    }
}

/// The mode curve: most probable state per time slice.
#[pyclass(name = "MpppCurve", frozen)]
struct PyMpppCurve(MpppCurve);

#[pymethods]
impl PyMpppCurve {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.0.times().to_vec()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn n_slices(&self) -> usize {
        self.0.n_slices()
    }

    #[getter]
    fn diverged_paths(&self) -> usize {
        self.0.diverged_paths()
    }

    fn mode_at(&self, j: usize) -> PyResult<Vec<f64>> {
        if j >= self.0.n_slices() {
            return Err(PyIndexError::new_err("slice out of range"));
        }
        Ok(self.0.mode_at(j).to_vec())
    }

    fn bandwidth_at(&self, j: usize) -> PyResult<Vec<f64>> {
        if j >= self.0.n_slices() {
            return Err(PyIndexError::new_err("slice out of range"));
        }
        Ok(self.0.bandwidth_at(j).to_vec())
    }

    fn is_multimodal(&self, j: usize) -> PyResult<bool> {
        if j >= self.0.n_slices() {
            return Err(PyIndexError::new_err("slice out of range"));
        }
        Ok(self.0.is_multimodal(j))
    }

    /// Modes flattened slice-major, `n_slices * dim` long.
    fn modes_flat(&self) -> Vec<f64> {
        self.0.modes_flat().to_vec()
    }
}

/// A curve plus its oracle comparison.
#[pyclass(name = "MpppReport", frozen)]
struct PyMpppReport(MpppReport);

#[pymethods]
impl PyMpppReport {
    #[getter]
    fn curve(&self) -> PyMpppCurve {
        PyMpppCurve(self.0.curve.clone())
    }

    #[getter]
    fn oracle_curve(&self) -> Option<Vec<f64>> {
        self.0.oracle_curve.clone()
    }

    #[getter]
    fn endpoint_rel_error(&self) -> Option<f64> {
        self.0.endpoint_rel_error
    }

    #[getter]
    fn endpoint_abs_error(&self) -> Option<f64> {
        self.0.endpoint_abs_error
    }

    #[getter]
    fn sup_abs_error(&self) -> Option<f64> {
        self.0.sup_abs_error
    }

    #[getter]
    fn endpoint_relative_undefined(&self) -> bool {
        self.0.endpoint_relative_undefined
    }
}

/// Simulates the ensemble with per-path substreams.
#[pyfunction]
fn simulate(system: &PySdeSystem, grid: &PySimGrid) -> PyResult<PyPathEnsemble> {
    sim::simulate(&system.0, &grid.0)
        .map(PyPathEnsemble)
        .map_err(value_err)
}

/// Mode curve of a stored ensemble.
#[pyfunction]
fn compute_mppp(ens: &PyPathEnsemble, kcfg: &PyKdeConfig) -> PyResult<PyMpppCurve> {
    mppp::compute_mppp(&ens.0, &kcfg.0)
        .map(PyMpppCurve)
        .map_err(value_err)
}

/// Simulate-and-extract without storing the ensemble; same curve as
/// `compute_mppp` on the stored ensemble.
#[pyfunction]
fn compute_mppp_streaming(
    system: &PySdeSystem,
    grid: &PySimGrid,
    kcfg: &PyKdeConfig,
) -> PyResult<PyMpppCurve> {
    mppp::compute_mppp_streaming(&system.0, &grid.0, &kcfg.0)
        .map(PyMpppCurve)
        .map_err(value_err)
}

/// Gaussian kernel density estimate of a sample set.
#[pyfunction]
fn kde(samples: Vec<f64>, kcfg: &PyKdeConfig) -> PyResult<PyDensityEstimate> {
    density::kde(&samples, &kcfg.0)
        .map(PyDensityEstimate)
        .map_err(value_err)
}

#[pyfunction]
fn score_against_ou(curve: &PyMpppCurve, alpha: f64, beta: f64, x0: f64) -> PyResult<PyMpppReport> {
    let spec = OracleSpec::AdditiveLinear(AdditiveLinearParams { alpha, beta, x0 });
    mppp::score_against_oracle(curve.0.clone(), &spec)
        .map(PyMpppReport)
        .map_err(value_err)
}

#[pyfunction]
fn score_against_gbm(curve: &PyMpppCurve, mu: f64, sigma: f64, x0: f64) -> PyResult<PyMpppReport> {
    let spec = OracleSpec::Gbm(GbmParams { mu, sigma, x0 });
    mppp::score_against_oracle(curve.0.clone(), &spec)
        .map(PyMpppReport)
        .map_err(value_err)
}

#[pyfunction]
fn score_against_rotation2d(curve: &PyMpppCurve, x0: f64, y0: f64) -> PyResult<PyMpppReport> {
    let spec = OracleSpec::Rotation2d(Rotation2dParams { x0, y0 });
    mppp::score_against_oracle(curve.0.clone(), &spec)
        .map(PyMpppReport)
        .map_err(value_err)
}

#[pyfunction]
fn seed_stability_warning(
    a: &PyMpppCurve,
    b: &PyMpppCurve,
    reference_sup_error: f64,
) -> Option<String> {
    mppp::seed_stability_warning(&a.0, &b.0, reference_sup_error)
}

#[pyfunction]
fn ou_mean(alpha: f64, beta: f64, x0: f64, t: f64) -> f64 {
    oracle::ou_mean(&AdditiveLinearParams { alpha, beta, x0 }, t)
}

#[pyfunction]
fn ou_variance(alpha: f64, beta: f64, x0: f64, t: f64) -> f64 {
    oracle::ou_variance(&AdditiveLinearParams { alpha, beta, x0 }, t)
}

#[pyfunction]
fn ou_density(alpha: f64, beta: f64, x0: f64, x: f64, t: f64) -> PyResult<f64> {
    oracle::ou_density(&AdditiveLinearParams { alpha, beta, x0 }, t, x).map_err(value_err)
}

#[pyfunction]
fn ou_maximizer(alpha: f64, beta: f64, x0: f64, t: f64) -> f64 {
    oracle::ou_maximizer(&AdditiveLinearParams { alpha, beta, x0 }, t)
}

#[pyfunction]
fn gbm_solution_density(mu: f64, sigma: f64, x0: f64, x: f64, t: f64) -> PyResult<f64> {
    oracle::gbm_solution_density(&GbmParams { mu, sigma, x0 }, t, x).map_err(value_err)
}

#[pyfunction]
fn gbm_maximizer(mu: f64, sigma: f64, x0: f64, t: f64) -> f64 {
    oracle::gbm_maximizer(&GbmParams { mu, sigma, x0 }, t)
}

#[pyfunction]
fn rotation2d_most_probable(x0: f64, y0: f64, t: f64) -> (f64, f64) {
    let [x, y] = oracle::rotation2d_most_probable(&Rotation2dParams { x0, y0 }, t);
    (x, y)
}

#[pymodule]
fn mppp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("DEFAULT_MASTER_SEED", DEFAULT_MASTER_SEED)?;
    m.add_class::<PyExpr>()?;
    m.add_class::<PySdeSystem>()?;
    m.add_class::<PySimGrid>()?;
    m.add_class::<PyKdeConfig>()?;
    m.add_class::<PyDensityEstimate>()?;
    m.add_class::<PyPathEnsemble>()?;
    m.add_class::<PyMpppCurve>()?;
    m.add_class::<PyMpppReport>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(compute_mppp, m)?)?;
    m.add_function(wrap_pyfunction!(compute_mppp_streaming, m)?)?;
    m.add_function(wrap_pyfunction!(kde, m)?)?;
    m.add_function(wrap_pyfunction!(score_against_ou, m)?)?;
    m.add_function(wrap_pyfunction!(score_against_gbm, m)?)?;
    m.add_function(wrap_pyfunction!(score_against_rotation2d, m)?)?;
    m.add_function(wrap_pyfunction!(seed_stability_warning, m)?)?;
    m.add_function(wrap_pyfunction!(ou_mean, m)?)?;
    m.add_function(wrap_pyfunction!(ou_variance, m)?)?;
    m.add_function(wrap_pyfunction!(ou_density, m)?)?;
    m.add_function(wrap_pyfunction!(ou_maximizer, m)?)?;
    m.add_function(wrap_pyfunction!(gbm_solution_density, m)?)?;
    m.add_function(wrap_pyfunction!(gbm_maximizer, m)?)?;
    m.add_function(wrap_pyfunction!(rotation2d_most_probable, m)?)?;
    Ok(())
}
