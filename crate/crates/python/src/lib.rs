//! Python bindings: meshes, jump controls, the benchmark examples, the
//! support iteration, convergence studies and the self-checks.

use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use bvcontrol::study::{self, StudyOptions};
use bvcontrol::{checks, Error, ExampleSpec, Jump, OuterConfig, ProxOptions};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_) | Error::InvalidCoefficient(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

#[pyclass(name = "Mesh", frozen, from_py_object)]
#[derive(Clone)]
struct PyMesh {
    inner: Arc<bvcontrol::Mesh>,
}

#[pymethods]
impl PyMesh {
    #[staticmethod]
    fn uniform(n: usize) -> PyResult<Self> {
        Ok(Self { inner: Arc::new(bvcontrol::Mesh::uniform(n).map_err(to_py)?) })
    }

    #[staticmethod]
    fn from_nodes(nodes: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: Arc::new(bvcontrol::Mesh::from_nodes(nodes).map_err(to_py)?) })
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.inner.nodes().to_vec()
    }

    #[getter]
    fn cell_sizes(&self) -> Vec<f64> {
        self.inner.cell_sizes().to_vec()
    }

    #[getter]
    fn h_max(&self) -> f64 {
        self.inner.h_max()
    }

    fn __len__(&self) -> usize {
        self.inner.num_cells()
    }

    fn __repr__(&self) -> String {
        format!("Mesh(cells={}, h_max={})", self.inner.num_cells(), self.inner.h_max())
    }
}

/// Piecewise constant control: a base value plus jumps `(x, c)`.
#[pyclass(name = "JumpControl", frozen, from_py_object)]
#[derive(Clone)]
struct PyJumpControl {
    inner: bvcontrol::JumpControl,
}

#[pymethods]
impl PyJumpControl {
    #[new]
    #[pyo3(signature = (base, jumps = Vec::new()))]
    fn new(base: f64, jumps: Vec<(f64, f64)>) -> PyResult<Self> {
        let jumps = jumps.into_iter().map(|(x, c)| Jump { x, c }).collect();
        Ok(Self { inner: bvcontrol::JumpControl::new(base, jumps).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text).map(|inner| Self { inner }).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn base(&self) -> f64 {
        self.inner.base()
    }

    #[getter]
    fn jumps(&self) -> Vec<(f64, f64)> {
        self.inner.jumps().iter().map(|j| (j.x, j.c)).collect()
    }

    fn __call__(&self, x: f64) -> f64 {
        self.inner.evaluate(x)
    }

    fn bv_seminorm(&self) -> f64 {
        self.inner.bv_seminorm()
    }

    fn l1_distance(&self, other: &PyJumpControl) -> f64 {
        self.inner.l1_distance(&other.inner)
    }

    fn l2_distance(&self, other: &PyJumpControl) -> f64 {
        self.inner.l2_distance(&other.inner)
    }

    fn cell_integrals(&self, mesh: &PyMesh) -> Vec<f64> {
        self.inner.cell_integrals(&mesh.inner)
    }

    /// Cell averages on `mesh`.
    fn project(&self, mesh: &PyMesh) -> Vec<f64> {
        self.inner.project(&mesh.inner).into_values()
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("control serializes")
    }

    fn __repr__(&self) -> String {
        format!("JumpControl(base={}, jumps={:?})", self.inner.base(), self.jumps())
    }
}

#[pyclass(name = "OuterResult", frozen)]
struct PyOuterResult {
    inner: bvcontrol::OuterResult,
}

#[pymethods]
impl PyOuterResult {
    #[getter]
    fn termination(&self) -> String {
        format!("{:?}", self.inner.termination)
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged()
    }

    #[getter]
    fn outer_iterations(&self) -> usize {
        self.inner.outer_iterations
    }

    #[getter]
    fn assumption_ok(&self) -> bool {
        self.inner.assumption_ok
    }

    #[getter]
    fn objective(&self) -> f64 {
        self.inner.solution.objective
    }

    #[getter]
    fn kkt_residual(&self) -> f64 {
        self.inner.solution.kkt_residual
    }

    #[getter]
    fn control(&self) -> PyJumpControl {
        PyJumpControl { inner: self.inner.solution.control() }
    }

    #[getter]
    fn support_nodes(&self) -> Vec<usize> {
        self.inner.support_nodes.clone()
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.inner.mesh().nodes().to_vec()
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.inner.solution.y.values().to_vec()
    }

    #[getter]
    fn p(&self) -> Vec<f64> {
        self.inner.solution.p.values().to_vec()
    }

    #[getter]
    fn phi(&self) -> Vec<f64> {
        self.inner.solution.phi.values().to_vec()
    }

    /// `(m_k, t_k, f^k)` per outer iteration.
    #[getter]
    fn history(&self) -> Vec<(usize, Vec<f64>, f64)> {
        self.inner.history.iter().map(|h| (h.m, h.support.clone(), h.objective)).collect()
    }
}

#[pyclass(name = "Example", frozen)]
struct PyExample {
    inner: ExampleSpec,
}

#[pymethods]
impl PyExample {
    #[new]
    #[pyo3(signature = (name, alpha = None))]
    fn new(name: &str, alpha: Option<f64>) -> PyResult<Self> {
        Ok(Self { inner: ExampleSpec::by_name(name, alpha).map_err(to_py)? })
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn has_exact(&self) -> bool {
        self.inner.exact.is_some()
    }

    /// Desired state averaged over the cells of `mesh`.
    fn yd_cells(&self, mesh: &PyMesh) -> Vec<f64> {
        self.inner.yd_cells(&mesh.inner)
    }

    #[pyo3(signature = (n, epsilon = 1e-10, max_outer = 50))]
    fn solve(&self, py: Python<'_>, n: usize, epsilon: f64, max_outer: usize) -> PyResult<PyOuterResult> {
        let config = OuterConfig { epsilon, max_outer, ..OuterConfig::default() };
        let inner = py.detach(|| self.inner.solve(n, &config)).map_err(to_py)?;
        Ok(PyOuterResult { inner })
    }

    /// Convergence study over `N = 2^k`; returns the report as JSON text.
    #[pyo3(signature = (levels = (2, 11), jobs = 1, reference_level = 10, fmt = "json"))]
    fn study(&self, py: Python<'_>, levels: (u32, u32), jobs: usize, reference_level: u32, fmt: &str) -> PyResult<String> {
        let opts = StudyOptions { levels, reference_level, jobs: jobs.max(1), ..Default::default() };
        let report = py.detach(|| study::run_study(&self.inner, &opts)).map_err(to_py)?;
        match fmt {
            "json" => Ok(report.to_json()),
            "csv" => Ok(report.to_csv()),
            other => Err(PyValueError::new_err(format!("unknown format {other:?}, expected json or csv"))),
        }
    }
}

/// Reduced problem on a fixed jump support with the unit-coefficient state equation.
#[pyclass(name = "ReducedProblem", frozen)]
struct PyReducedProblem {
    inner: bvcontrol::ReducedProblem,
}

#[pymethods]
impl PyReducedProblem {
    #[new]
    fn new(mesh: &PyMesh, yd_cells: Vec<f64>, alpha: f64, support: Vec<usize>) -> PyResult<Self> {
        let sys = bvcontrol::MixedSystem::assemble(mesh.inner.clone(), &bvcontrol::Coefficients::default()).map_err(to_py)?;
        let inner = bvcontrol::ReducedProblem::new(Arc::new(sys), yd_cells, alpha, support).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn objective(&self, a: f64, c: Vec<f64>) -> PyResult<f64> {
        self.inner.objective(a, &c).map_err(to_py)
    }

    fn smooth_gradient(&self, a: f64, c: Vec<f64>) -> PyResult<(f64, Vec<f64>)> {
        self.inner.smooth_gradient(a, &c).map_err(to_py)
    }

    /// Returns `(a, c, objective, kkt_residual)`.
    #[pyo3(signature = (tol = 1e-12, max_iters = 20000))]
    fn solve(&self, py: Python<'_>, tol: f64, max_iters: usize) -> PyResult<(f64, Vec<f64>, f64, f64)> {
        let init = vec![0.0; self.inner.support().len()];
        let sol = py
            .detach(|| self.inner.prox_solve(0.0, &init, ProxOptions { tol, max_iters }))
            .map_err(to_py)?;
        Ok((sol.a, sol.c, sol.objective, sol.kkt_residual))
    }
}

#[pyfunction]
fn eoc(e1: f64, e2: f64, h1: f64, h2: f64) -> Option<f64> {
    study::eoc(e1, e2, h1, h2)
}

#[pyfunction]
fn bestfit_slope(hs: Vec<f64>, errs: Vec<f64>) -> PyResult<f64> {
    study::bestfit_slope(&hs, &errs).map_err(to_py)
}

/// Runs the self-check suites; returns `(name, passed, detail)` triples.
#[pyfunction]
#[pyo3(signature = (seed = checks::DEFAULT_SEED))]
fn check(py: Python<'_>, seed: u64) -> PyResult<Vec<(String, bool, String)>> {
    let out = py.detach(|| checks::run_all(seed, &OuterConfig::default())).map_err(to_py)?;
    Ok(out.into_iter().map(|o| (o.name, o.passed, o.detail)).collect())
}

#[pymodule]
pub fn bvcontrol_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PyJumpControl>()?;
    m.add_class::<PyOuterResult>()?;
    m.add_class::<PyExample>()?;
    m.add_class::<PyReducedProblem>()?;
    m.add_function(wrap_pyfunction!(eoc, m)?)?;
    m.add_function(wrap_pyfunction!(bestfit_slope, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    Ok(())
}
