//! Python bindings: covariance models, problems, datasets, the minimum-norm
//! solvers, widths, bounds and the experiment runner.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use interp_lab::bounds::{self, BoundReport, McSettings, Variant};
use interp_lab::experiments::{self, ExperimentConfig, ExperimentError};
use interp_lab::interpolators::{self, InterpolatorResult};
use interp_lab::splitting::{self, BoundFamily};
use interp_lab::{complexity, CovarianceModel, Dataset as CoreDataset, LabError, Norm, ProblemSpec};
use nalgebra::DMatrix;

fn lab_err(e: LabError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn exp_err(e: ExperimentError) -> PyErr {
    match e {
        ExperimentError::Solver(_) | ExperimentError::Output { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_norm(s: &str) -> PyResult<Norm> {
    s.parse().map_err(lab_err)
}

fn parse_variant(s: &str) -> PyResult<Variant> {
    match s {
        "theorem" => Ok(Variant::Theorem),
        "appendix_sharp" | "sharp" => Ok(Variant::AppendixSharp),
        other => Err(PyValueError::new_err(format!("unknown variant {other:?}"))),
    }
}

fn report<'py>(py: Python<'py>, r: &BoundReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("kind", serde_json::to_value(r.kind).ok().and_then(|v| v.as_str().map(String::from)))?;
    d.set_item("value", r.value)?;
    d.set_item("valid", r.valid)?;
    d.set_item("delta", r.delta)?;
    d.set_item("terms", r.terms.clone())?;
    d.set_item("interval", r.interval)?;
    d.set_item("notes", r.notes.clone())?;
    Ok(d)
}

fn interpolant<'py>(py: Python<'py>, r: &InterpolatorResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("w", r.w.clone())?;
    d.set_item("norm", r.norm_value)?;
    d.set_item("train_loss", r.train_loss)?;
    d.set_item("pop_loss", r.pop_loss)?;
    d.set_item("max_residual", r.solver_stats.max_residual)?;
    d.set_item("duality_gap", r.solver_stats.duality_gap)?;
    Ok(d)
}

/// Covariance `Σ` of the Gaussian features.
#[pyclass(name = "Covariance", frozen)]
struct PyCovariance(CovarianceModel);

#[pymethods]
impl PyCovariance {
    #[staticmethod]
    fn diagonal(values: Vec<f64>) -> PyResult<Self> {
        CovarianceModel::from_diagonal(&values).map(Self).map_err(lab_err)
    }

    #[staticmethod]
    #[pyo3(signature = (dim, scale = 1.0))]
    fn identity(dim: usize, scale: f64) -> PyResult<Self> {
        CovarianceModel::scaled_identity(dim, scale).map(Self).map_err(lab_err)
    }

    /// Dense symmetric PSD matrix given as rows.
    #[staticmethod]
    fn from_matrix(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(PyValueError::new_err("matrix must be square"));
        }
        let m = DMatrix::from_fn(d, d, |i, j| rows[i][j]);
        CovarianceModel::from_matrix(&m).map(Self).map_err(lab_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.0.eigenvalues().to_vec()
    }

    fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// `(r(Σ), R(Σ))`.
    fn effective_ranks(&self) -> PyResult<(f64, f64)> {
        complexity::effective_ranks_l2(&self.0).map_err(lab_err)
    }

    /// `(E‖Σ^{1/2}H‖_*, standard error)` for the unit ball of `norm`.
    #[pyo3(signature = (norm = "l2", samples = 20000, seed = 0))]
    fn gaussian_width(&self, norm: &str, samples: usize, seed: u64) -> PyResult<(f64, f64)> {
        let w = complexity::gaussian_width_mc(&self.0, parse_norm(norm)?, 1.0, samples, seed)
            .map_err(lab_err)?;
        Ok((w.mean, w.std_error))
    }

    fn __repr__(&self) -> String {
        format!("Covariance(dim={}, trace={})", self.0.dim(), self.0.trace())
    }
}

/// Regression problem `Y = Xw* + ξ` with `n` samples.
#[pyclass(name = "Problem", frozen)]
struct PyProblem(ProblemSpec);

#[pymethods]
impl PyProblem {
    #[new]
    #[pyo3(signature = (cov, w_star, n, sigma = None, noise_variance = None))]
    fn new(
        cov: &PyCovariance,
        w_star: Vec<f64>,
        n: usize,
        sigma: Option<f64>,
        noise_variance: Option<f64>,
    ) -> PyResult<Self> {
        let spec = match (sigma, noise_variance) {
            (Some(_), Some(_)) => {
                return Err(PyValueError::new_err("give either sigma or noise_variance"))
            }
            (_, Some(v)) => ProblemSpec::with_noise_variance(cov.0.clone(), w_star, v, n),
            (s, None) => ProblemSpec::new(cov.0.clone(), w_star, s.unwrap_or(1.0), n),
        };
        spec.map(Self).map_err(lab_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn null_risk(&self) -> f64 {
        self.0.null_risk()
    }

    fn bayes_risk(&self) -> f64 {
        self.0.bayes_risk()
    }

    fn population_loss(&self, w: Vec<f64>) -> PyResult<f64> {
        interp_lab::population_loss(&self.0, &w).map_err(lab_err)
    }

    fn sample(&self, seed: u64) -> PyDataset {
        PyDataset(interp_lab::sample_dataset(&self.0, seed))
    }
}

#[pyclass(name = "Dataset", frozen)]
struct PyDataset(CoreDataset);

#[pymethods]
impl PyDataset {
    #[getter]
    fn x(&self) -> Vec<Vec<f64>> {
        self.0.x.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.0.y.iter().copied().collect()
    }

    fn min_l2<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let r = interpolators::min_l2_interpolator(&self.0).map_err(lab_err)?;
        interpolant(py, &r)
    }

    /// Basis pursuit.
    #[pyo3(signature = (tol = 1e-8))]
    fn min_l1<'py>(&self, py: Python<'py>, tol: f64) -> PyResult<Bound<'py, PyDict>> {
        let r = interpolators::min_l1_interpolator(&self.0, tol).map_err(lab_err)?;
        interpolant(py, &r)
    }

    /// `(value, w)` maximizing the population loss over interpolators with
    /// `‖w‖₂ ≤ b`.
    fn worst_case_l2(&self, problem: &PyProblem, b: f64) -> PyResult<(f64, Vec<f64>)> {
        let r = interpolators::worst_case_l2_interpolator(&problem.0, &self.0, b)
            .map_err(lab_err)?;
        Ok((r.value, r.w))
    }
}

/// Main uniform bound at the top-`k` split.
#[pyfunction]
#[pyo3(signature = (problem, k, b, delta = 0.1, norm = "l2", variant = "appendix_sharp", samples = 20000, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn ucb_main<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    k: usize,
    b: f64,
    delta: f64,
    norm: &str,
    variant: &str,
    samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let split = splitting::split_top_k(&problem.0.cov, k).map_err(lab_err)?;
    let mc = McSettings { samples, seed };
    let r = bounds::ucb_main(&problem.0, &split, parse_norm(norm)?, b, delta, parse_variant(variant)?, &mc)
        .map_err(lab_err)?;
    report(py, &r)
}

/// `(k, report)` minimizing the chosen bound family over top-`k` splits.
#[pyfunction]
#[pyo3(signature = (problem, b, delta = 0.1, family = "euclid_risk", norm = "l2", variant = "appendix_sharp", samples = 20000, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn optimize_split<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    b: f64,
    delta: f64,
    family: &str,
    norm: &str,
    variant: &str,
    samples: usize,
    seed: u64,
) -> PyResult<(usize, Bound<'py, PyDict>)> {
    let family: BoundFamily = family.parse().map_err(lab_err)?;
    let mc = McSettings { samples, seed };
    let (k, r) = splitting::optimize_split(
        &problem.0,
        delta,
        family,
        parse_norm(norm)?,
        b,
        parse_variant(variant)?,
        &mc,
    )
    .map_err(lab_err)?;
    Ok((k, report(py, &r)?))
}

/// Runs an experiment from TOML (or JSON) text; returns
/// `{table name: CSV text}`.
#[pyfunction]
#[pyo3(signature = (config, seed = None, threads = None))]
fn run_experiment(
    py: Python<'_>,
    config: &str,
    seed: Option<u64>,
    threads: Option<usize>,
) -> PyResult<Vec<(String, String)>> {
    let mut cfg = ExperimentConfig::parse(config).map_err(exp_err)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if threads.is_some() {
        cfg.threads = threads;
    }
    let out = py.detach(|| experiments::run(&cfg)).map_err(exp_err)?;
    Ok(out.tables.iter().map(|t| (t.name.clone(), t.to_csv())).collect())
}

#[pymodule]
#[pyo3(name = "interp_lab")]
fn interp_lab_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCovariance>()?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(ucb_main, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_split, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
