//! Python bindings: manifests, fields, the pipeline and the sweep.
//!
//! Fields cross the boundary as flat lists in row-major node order (axis 0
//! fastest), so the module has no dependency on numpy.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use qtat::cli::{self, ExperimentManifest, PipelineOutput, SweepSpec};
use qtat::grid::io::{read_field as read_qtaf, StoredField};
use qtat::grid::{Grid, RealField};
use qtat::Error;

create_exception!(
    qtat,
    QtatError,
    PyException,
    "Base class for toolkit errors."
);
create_exception!(
    qtat,
    ConfigError,
    QtatError,
    "Invalid manifest, parameter or file."
);
create_exception!(qtat, SolverError, QtatError, "The forward solver failed.");
create_exception!(
    qtat,
    ImproperError,
    QtatError,
    "The probes do not give a proper measurement set."
);

fn to_py(err: Error) -> PyErr {
    let msg = err.to_string();
    match err {
        Error::Improper(_) => ImproperError::new_err(msg),
        Error::NotConverged { .. } | Error::Singular(_) => SolverError::new_err(msg),
        _ => ConfigError::new_err(msg),
    }
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes")
}

/// Experiment manifest. Construct from JSON text, or with no argument for
/// the defaults.
#[pyclass(name = "Manifest", module = "qtat", skip_from_py_object)]
#[derive(Clone)]
struct PyManifest {
    inner: ExperimentManifest,
}

#[pymethods]
impl PyManifest {
    #[new]
    #[pyo3(signature = (json = None))]
    fn new(json: Option<&str>) -> PyResult<Self> {
        let inner = match json {
            Some(text) => ExperimentManifest::from_json(text).map_err(to_py)?,
            None => ExperimentManifest::default(),
        };
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: ExperimentManifest::load(&path).map_err(to_py)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn hash(&self) -> String {
        self.inner.hash()
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(to_py)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.grid.n
    }

    #[setter]
    fn set_n(&mut self, n: usize) {
        self.inner.grid.n = n;
    }

    #[getter]
    fn k(&self) -> f64 {
        self.inner.k
    }

    #[setter]
    fn set_k(&mut self, k: f64) {
        self.inner.k = k;
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    /// Relative noise level.
    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.noise.sigma
    }

    #[setter]
    fn set_sigma(&mut self, sigma: f64) {
        self.inner.noise.sigma = sigma;
    }

    /// Noise correlation length.
    #[getter]
    fn delta(&self) -> f64 {
        self.inner.noise.delta
    }

    #[setter]
    fn set_delta(&mut self, delta: f64) {
        self.inner.noise.delta = delta;
    }

    #[getter]
    fn refine(&self) -> bool {
        self.inner.refine.enabled
    }

    #[setter]
    fn set_refine(&mut self, enabled: bool) {
        self.inner.refine.enabled = enabled;
    }

    #[getter]
    fn output_dir(&self) -> PathBuf {
        self.inner.output_dir.clone()
    }

    #[setter]
    fn set_output_dir(&mut self, dir: PathBuf) {
        self.inner.output_dir = dir;
    }

    /// Sets the sweep block: noise levels, correlation lengths and the
    /// number of realizations per cell.
    fn set_sweep(&mut self, sigmas: Vec<f64>, deltas: Vec<f64>, realizations: usize) {
        self.inner.sweep = Some(SweepSpec {
            sigmas,
            deltas,
            realizations,
        });
    }

    fn __repr__(&self) -> String {
        format!(
            "Manifest(n={}, k={}, seed={}, hash={})",
            self.inner.grid.n,
            self.inner.k,
            self.inner.seed,
            &self.inner.hash()[..12]
        )
    }
}

/// Real nodal field on a uniform grid over `[-half_width, half_width]^dim`.
#[pyclass(name = "Field", module = "qtat", skip_from_py_object)]
#[derive(Clone)]
struct PyField {
    inner: RealField,
}

#[pymethods]
impl PyField {
    #[new]
    #[pyo3(signature = (values, n, half_width = 0.5, dim = 2))]
    fn new(values: Vec<f64>, n: usize, half_width: f64, dim: usize) -> PyResult<Self> {
        let grid = Grid::new(dim, n, half_width).map_err(to_py)?;
        Ok(Self {
            inner: RealField::new(grid, values).map_err(to_py)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.grid().n()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.grid().dim()
    }

    #[getter]
    fn half_width(&self) -> f64 {
        self.inner.grid().half_width()
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.inner.grid().spacing()
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    /// Node coordinates along one axis.
    fn axis(&self) -> Vec<f64> {
        let g = self.inner.grid();
        (0..g.n()).map(|i| g.axis_coord(i)).collect()
    }

    /// Values along the horizontal line through the centre.
    fn midline(&self) -> Vec<f64> {
        self.inner.midline()
    }

    fn min(&self) -> f64 {
        self.inner.min()
    }

    fn max(&self) -> f64 {
        self.inner.max()
    }

    fn norm_l2(&self) -> f64 {
        self.inner.norm_l2()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Field(n={}, dim={}, min={:.4e}, max={:.4e})",
            self.n(),
            self.dim(),
            self.min(),
            self.max()
        )
    }
}

fn field(f: &RealField) -> PyField {
    PyField { inner: f.clone() }
}

/// Result of an in-memory pipeline run.
#[pyclass(name = "Run", module = "qtat")]
struct PyRun {
    report: String,
    #[pyo3(get)]
    q_true: PyField,
    #[pyo3(get)]
    q_exact: Option<PyField>,
    #[pyo3(get)]
    q_s: Option<PyField>,
    #[pyo3(get)]
    q_star: Option<PyField>,
    #[pyo3(get)]
    residual_history: Vec<f64>,
}

#[pymethods]
impl PyRun {
    /// Reconstruction report as JSON text.
    fn report_json(&self) -> String {
        self.report.clone()
    }
}

impl From<PipelineOutput> for PyRun {
    fn from(out: PipelineOutput) -> Self {
        Self {
            report: json(&out.report),
            q_true: field(&out.q_true),
            q_exact: out.q_exact.as_ref().map(field),
            q_s: out.q_s.as_ref().map(field),
            q_star: out.refinement.as_ref().map(|r| field(&r.q_star_clipped)),
            residual_history: out
                .refinement
                .map(|r| r.residual_history)
                .unwrap_or_default(),
        }
    }
}

/// The manifest's phantom sampled on its grid.
#[pyfunction]
fn phantom(manifest: &PyManifest) -> PyResult<PyField> {
    let m = &manifest.inner;
    let grid = m.grid.build().map_err(to_py)?;
    Ok(PyField {
        inner: m.phantom.generate(&grid).map_err(to_py)?,
    })
}

/// Runs every stage in memory without writing files.
#[pyfunction]
fn execute(py: Python<'_>, manifest: &PyManifest) -> PyResult<PyRun> {
    let m = manifest.inner.clone();
    let out = py.detach(move || cli::execute(&m)).map_err(to_py)?;
    Ok(out.into())
}

/// Runs the pipeline into `manifest.output_dir`; returns the report JSON.
#[pyfunction]
fn run_pipeline(py: Python<'_>, manifest: &PyManifest) -> PyResult<String> {
    let m = manifest.inner.clone();
    let report = py.detach(move || cli::run_pipeline(&m)).map_err(to_py)?;
    Ok(json(&report))
}

/// Runs the sweep into `manifest.output_dir`; returns the summary JSON.
#[pyfunction]
fn run_sweep(py: Python<'_>, manifest: &PyManifest) -> PyResult<String> {
    let m = manifest.inner.clone();
    let summary = py.detach(move || cli::run_sweep(&m)).map_err(to_py)?;
    Ok(json(&summary))
}

/// Writes plot tables for a run directory; returns the written paths.
#[pyfunction]
fn export_plotdata(run_dir: PathBuf, out_dir: PathBuf) -> PyResult<Vec<PathBuf>> {
    cli::export_plotdata(&run_dir, &out_dir).map_err(to_py)
}

/// Reads a field file. Complex fields come back as `(real, imag)`.
#[pyfunction]
fn read_field(py: Python<'_>, path: PathBuf) -> PyResult<Py<PyAny>> {
    let (stored, _) = read_qtaf(&path).map_err(to_py)?;
    match stored {
        StoredField::Real(f) => Ok(Py::new(py, field(&f))?.into_any()),
        StoredField::Complex(f) => {
            let pair = (Py::new(py, field(&f.re()))?, Py::new(py, field(&f.im()))?);
            Ok(pair.into_pyobject(py)?.into_any().unbind())
        }
    }
}

/// Pointwise projection onto `[q_min, q_max]`.
#[pyfunction]
fn clip(f: &PyField, q_min: f64, q_max: f64) -> PyResult<PyField> {
    Ok(PyField {
        inner: qtat::refine::clip(&f.inner, q_min, q_max).map_err(to_py)?,
    })
}

/// Stability constant of the refinement step.
#[pyfunction]
fn eta(dim: usize, gamma: f64, radius: f64) -> f64 {
    qtat::refine::eta(dim, gamma, radius)
}

/// `‖a − b‖ / ‖b‖` over the whole grid.
#[pyfunction]
fn relative_error(a: &PyField, b: &PyField) -> PyResult<f64> {
    if !a.inner.same_grid(&b.inner) {
        return Err(ConfigError::new_err("fields live on different grids"));
    }
    Ok(qtat::inversion::relative_error(
        &a.inner,
        &b.inner,
        &vec![true; a.inner.len()],
    ))
}

#[pymodule(name = "qtat")]
fn qtat_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("__version__", cli::TOOLKIT_VERSION)?;
    m.add("QtatError", py.get_type::<QtatError>())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add("SolverError", py.get_type::<SolverError>())?;
    m.add("ImproperError", py.get_type::<ImproperError>())?;
    m.add_class::<PyManifest>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyRun>()?;
    m.add_function(wrap_pyfunction!(phantom, m)?)?;
    m.add_function(wrap_pyfunction!(execute, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(export_plotdata, m)?)?;
    m.add_function(wrap_pyfunction!(read_field, m)?)?;
    m.add_function(wrap_pyfunction!(clip, m)?)?;
    m.add_function(wrap_pyfunction!(eta, m)?)?;
    m.add_function(wrap_pyfunction!(relative_error, m)?)?;
    Ok(())
}
