use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use elastmix::solver::SolveMethod;
use elastmix::{assembly, manufactured, solver, study, verify};

fn to_py(e: elastmix::Error) -> PyErr {
    if e.is_numerical() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

/// Uniform tensor-product grid on a box.
#[pyclass(name = "TensorGrid", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTensorGrid(elastmix::TensorGrid);

#[pymethods]
impl PyTensorGrid {
    #[new]
    #[pyo3(signature = (dim, subdivisions, bounds=None))]
    fn new(dim: usize, subdivisions: Vec<usize>, bounds: Option<Vec<(f64, f64)>>) -> PyResult<Self> {
        let bounds = bounds.unwrap_or_else(|| vec![(0.0, 1.0); dim]);
        elastmix::TensorGrid::new(dim, &bounds, &subdivisions)
            .map(Self)
            .map_err(to_py)
    }

    /// The unit box split into `n` elements per axis.
    #[staticmethod]
    fn unit(dim: usize, n: usize) -> PyResult<Self> {
        elastmix::TensorGrid::unit(dim, n).map(Self).map_err(to_py)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.0.h()
    }

    #[getter]
    fn subdivisions(&self) -> Vec<usize> {
        self.0.subdivisions().to_vec()
    }

    fn element_count(&self) -> usize {
        self.0.element_count()
    }

    fn face_count(&self, axis: usize) -> usize {
        self.0.face_count(axis)
    }

    fn ridge_count(&self, i: usize, j: usize) -> usize {
        self.0.ridge_count((i, j))
    }

    fn __repr__(&self) -> String {
        format!("TensorGrid(dim={}, subdivisions={:?})", self.0.dim(), self.0.subdivisions())
    }
}

/// Lame parameters of an isotropic material.
#[pyclass(name = "LameParams", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyLameParams(elastmix::LameParams);

#[pymethods]
impl PyLameParams {
    #[new]
    fn new(mu: f64, lam: f64) -> PyResult<Self> {
        elastmix::LameParams::new(mu, lam).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn from_young_poisson(young: f64, poisson: f64) -> PyResult<Self> {
        elastmix::LameParams::from_young_poisson(young, poisson)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.0.mu()
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.0.lambda()
    }

    fn __repr__(&self) -> String {
        format!("LameParams(mu={}, lam={})", self.0.mu(), self.0.lambda())
    }
}

/// The assembled saddle-point system.
#[pyclass(name = "SaddleSystem", frozen)]
struct PySaddleSystem {
    grid: elastmix::TensorGrid,
    system: elastmix::SaddleSystem,
}

#[pymethods]
impl PySaddleSystem {
    #[getter]
    fn stress_len(&self) -> usize {
        self.system.dofs().stress_len()
    }

    #[getter]
    fn disp_len(&self) -> usize {
        self.system.dofs().disp_len()
    }

    fn __len__(&self) -> usize {
        self.system.len()
    }

    /// Load vector `(f, psi_b)` of the named manufactured solution.
    fn manufactured_load(&self, solution: &str) -> PyResult<Vec<f64>> {
        let exact = manufactured::solution_by_name(solution, self.grid.dim(), *self.system.material()).map_err(to_py)?;
        Ok(assembly::assemble_load(&self.grid, |x: &[f64]| exact.f(x), self.system.dofs()))
    }

    /// Product of the full symmetric matrix with `x`.
    fn apply(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        if x.len() != self.system.len() {
            return Err(PyValueError::new_err(format!("expected {} entries, got {}", self.system.len(), x.len())));
        }
        Ok(self.system.apply(&x))
    }

    /// `(rows, cols, values)` of the full matrix.
    fn triplets(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let full = self.system.full_matrix();
        let mut r = Vec::with_capacity(full.nnz());
        let mut c = Vec::with_capacity(full.nnz());
        let mut v = Vec::with_capacity(full.nnz());
        for (i, j, x) in full.triplets() {
            r.push(i);
            c.push(j);
            v.push(x);
        }
        (r, c, v)
    }
}

#[pyfunction]
fn assemble(grid: &PyTensorGrid, material: &PyLameParams) -> PySaddleSystem {
    PySaddleSystem {
        grid: grid.0.clone(),
        system: elastmix::assemble(&grid.0, &material.0),
    }
}

/// Solves the system for `load`; returns a dict with `sigma`, `u` and solver statistics.
#[pyfunction]
#[pyo3(signature = (system, load, tol=solver::DEFAULT_TOLERANCE))]
fn solve<'py>(py: Python<'py>, system: &PySaddleSystem, load: Vec<f64>, tol: f64) -> PyResult<Bound<'py, PyDict>> {
    let (sigma, u, report) = py
        .detach(|| elastmix::solve(&system.system, &load, tol))
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("sigma", sigma.into_coefficients())?;
    out.set_item("u", u.into_coefficients())?;
    out.set_item("relative_residual", report.relative_residual)?;
    out.set_item("wall_time_s", report.wall_time.as_secs_f64())?;
    match report.method {
        SolveMethod::Direct { refinement_steps } => {
            out.set_item("method", "direct")?;
            out.set_item("iterations", refinement_steps)?;
        }
        SolveMethod::Minres { iterations } => {
            out.set_item("method", "minres")?;
            out.set_item("iterations", iterations)?;
        }
    }
    Ok(out)
}

#[pyfunction]
fn fit_rate(hs: Vec<f64>, errors: Vec<f64>) -> PyResult<f64> {
    verify::fit_rate(&hs, &errors).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (grid, max_dofs=verify::DEFAULT_PROBE_BUDGET))]
fn infsup_probe(py: Python<'_>, grid: &PyTensorGrid, max_dofs: usize) -> PyResult<f64> {
    py.detach(|| verify::infsup_probe(&grid.0, max_dofs)).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (grid, material, max_dofs=verify::DEFAULT_PROBE_BUDGET))]
fn kernel_ellipticity_probe(py: Python<'_>, grid: &PyTensorGrid, material: &PyLameParams, max_dofs: usize) -> PyResult<f64> {
    py.detach(|| verify::kernel_ellipticity_probe(&grid.0, &material.0, max_dofs))
        .map_err(to_py)
}

/// Runs a convergence study; returns `{"levels": [...], "rates": {...}, "warnings": [...]}`.
#[pyfunction]
#[pyo3(signature = (dim, levels, mu=0.5, lam=1.0, solution="sine", probe_infsup=false))]
fn run_study<'py>(
    py: Python<'py>,
    dim: usize,
    levels: Vec<usize>,
    mu: f64,
    lam: f64,
    solution: &str,
    probe_infsup: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let config = study::StudyConfig {
        dim,
        levels,
        mu,
        lambda: lam,
        solution: solution.to_string(),
        probe_infsup,
        ..study::StudyConfig::default()
    };
    let result = py.detach(|| study::run_study(&config)).map_err(to_py)?;
    let rows = pyo3::types::PyList::empty(py);
    for l in &result.levels {
        let r = &l.record;
        let row = PyDict::new(py);
        row.set_item("N", l.n)?;
        row.set_item("h", r.h)?;
        row.set_item("stress_dofs", r.stress_dofs)?;
        row.set_item("disp_dofs", r.disp_dofs)?;
        row.set_item("err_sigma_l2", r.sigma_l2)?;
        row.set_item("err_sigma_div", r.sigma_div)?;
        row.set_item("err_sigma_hdiv", r.sigma_hdiv)?;
        row.set_item("err_u_l2", r.u_l2)?;
        row.set_item("super_sigma_l2", r.super_sigma_l2)?;
        row.set_item("super_sigma_hdiv", r.super_sigma_hdiv)?;
        row.set_item("super_u_l2", r.super_u_l2)?;
        row.set_item("solve_residual", l.solve_residual)?;
        row.set_item("beta_h", l.beta_h)?;
        row.set_item("alpha_kernel", l.alpha_kernel)?;
        rows.append(row)?;
    }
    let rates = PyDict::new(py);
    for (name, fit) in &result.rates {
        rates.set_item(*name, fit.rate)?;
    }
    let out = PyDict::new(py);
    out.set_item("levels", rows)?;
    out.set_item("rates", rates)?;
    out.set_item("warnings", result.warnings.clone())?;
    Ok(out)
}

#[pymodule]
fn elastmix_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTensorGrid>()?;
    m.add_class::<PyLameParams>()?;
    m.add_class::<PySaddleSystem>()?;
    m.add_function(wrap_pyfunction!(assemble, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(fit_rate, m)?)?;
    m.add_function(wrap_pyfunction!(infsup_probe, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_ellipticity_probe, m)?)?;
    m.add_function(wrap_pyfunction!(run_study, m)?)?;
    Ok(())
}
