//! Python bindings. Reports come back as plain dicts decoded from the same
//! JSON the command line writes.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use tribvp_core::config::{OutputSection, RunConfig};
use tribvp_core::constants::LambdaChoice;
use tribvp_core::greens::check_properties;
use tribvp_core::pipeline;
use tribvp_core::problem::{BvpProblem, ProblemSpec, PRESETS};
use tribvp_core::report::to_json;
use tribvp_core::solver::SolveOptions;
use tribvp_core::verify::certify_deshifted;
use tribvp_core::Error;

create_exception!(tribvp, TribvpError, PyException, "Solver failure.");
create_exception!(
    tribvp,
    InfeasibleShellError,
    TribvpError,
    "No admissible cone shell."
);
create_exception!(
    tribvp,
    NotFoundError,
    TribvpError,
    "Solution not found or not certified."
);

fn to_py(e: Error) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        3 => InfeasibleShellError::new_err(e.to_string()),
        _ => NotFoundError::new_err(e.to_string()),
    }
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = to_json(value).map_err(to_py)?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "GreenKernel", module = "tribvp", frozen)]
struct PyGreenKernel(tribvp_core::GreenKernel);

#[pymethods]
impl PyGreenKernel {
    #[new]
    fn new(eta: f64) -> PyResult<Self> {
        tribvp_core::GreenKernel::new(eta).map(Self).map_err(to_py)
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.0.eta()
    }

    /// G(t, s).
    fn value(&self, t: f64, s: f64) -> PyResult<f64> {
        self.0.eval_g(t, s).map_err(to_py)
    }

    /// dG/dt.
    fn dt(&self, t: f64, s: f64) -> PyResult<f64> {
        self.0.eval_gt(t, s).map_err(to_py)
    }

    /// d2G/dt2.
    fn dtt(&self, t: f64, s: f64) -> PyResult<f64> {
        self.0.eval_gtt(t, s).map_err(to_py)
    }

    fn j(&self, s: f64) -> PyResult<f64> {
        self.0.eval_j(s).map_err(to_py)
    }

    fn q(&self, t: f64) -> PyResult<f64> {
        self.0.eval_q(t).map_err(to_py)
    }

    fn psi_star(&self, t: f64) -> PyResult<f64> {
        self.0.eval_psi_star(t).map_err(to_py)
    }

    #[getter]
    fn psi_star_norm(&self) -> f64 {
        self.0.psi_star_norm()
    }

    #[getter]
    fn b0(&self) -> f64 {
        self.0.b0()
    }

    #[getter]
    fn k(&self) -> f64 {
        self.0.k()
    }

    /// Property suite on a `grid` x `grid` mesh.
    #[pyo3(signature = (grid = 201))]
    fn check<'py>(&self, py: Python<'py>, grid: usize) -> PyResult<Bound<'py, PyAny>> {
        let report = check_properties(&self.0, grid).map_err(to_py)?;
        let dict = to_dict(py, &report)?;
        dict.set_item("pass", report.pass())?;
        Ok(dict)
    }

    fn __repr__(&self) -> String {
        format!("GreenKernel(eta={:?})", self.0.eta())
    }
}

#[pyclass(name = "Expr", module = "tribvp", frozen)]
struct PyExpr(tribvp_core::Expr);

#[pymethods]
impl PyExpr {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        tribvp_core::Expr::parse(text).map(Self).map_err(to_py)
    }

    #[pyo3(name = "eval", signature = (t = 0.0, x = 0.0))]
    fn evaluate(&self, t: f64, x: f64) -> f64 {
        self.0.eval(t, x)
    }

    #[getter]
    fn free_vars(&self) -> Vec<String> {
        self.0
            .free_vars()
            .iter()
            .map(|v| format!("{v:?}").to_lowercase())
            .collect()
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Expr({:?})", self.0.to_string())
    }
}

#[pyclass(name = "Problem", module = "tribvp", frozen)]
struct PyProblem(BvpProblem);

#[pymethods]
impl PyProblem {
    #[new]
    #[pyo3(signature = (*, eta, m, f, g, h, p, alpha, beta, label = "custom".to_string()))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        eta: f64,
        m: f64,
        f: String,
        g: String,
        h: String,
        p: String,
        alpha: f64,
        beta: f64,
        label: String,
    ) -> PyResult<Self> {
        let spec = ProblemSpec {
            label,
            eta,
            m,
            f,
            g,
            h,
            p,
            alpha,
            beta,
            envelope_derived: false,
        };
        BvpProblem::new(spec).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        BvpProblem::preset(name).map(Self).map_err(to_py)
    }

    /// The `x''' = lambda t (a x^-e + b exp(x))` family.
    #[staticmethod]
    #[pyo3(signature = (a = 1.0, b = 1.0, exponent = 0.5))]
    fn example32(a: f64, b: f64, exponent: f64) -> PyResult<Self> {
        BvpProblem::example32(a, b, exponent)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn label(&self) -> String {
        self.0.label().to_string()
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.0.eta()
    }

    #[getter]
    fn m(&self) -> f64 {
        self.0.m()
    }

    #[getter]
    fn spec<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, self.0.spec())
    }

    fn f(&self, t: f64, x: f64) -> f64 {
        self.0.f(t, x)
    }

    /// Envelope, growth and auxiliary-function checks.
    fn checks<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &pipeline::problem_checks(&self.0))
    }

    fn __repr__(&self) -> String {
        format!("Problem({:?})", self.0.label())
    }
}

fn run_config(problem: &PyProblem, r: f64, lam: Option<f64>, mesh_n: usize) -> PyResult<RunConfig> {
    let quad = SolveOptions::default()
        .quad
        .with_mesh_n(mesh_n)
        .map_err(to_py)?;
    let options = SolveOptions {
        quad,
        ..SolveOptions::default()
    };
    if !(r.is_finite() && r > 0.0) {
        return Err(PyValueError::new_err(format!(
            "r must be positive, got {r}"
        )));
    }
    Ok(RunConfig {
        problem: problem.0.clone(),
        lambda: lam.map_or(LambdaChoice::Auto, LambdaChoice::Fixed),
        r,
        options,
        output: OutputSection::default(),
    })
}

#[pyfunction]
fn presets() -> Vec<&'static str> {
    PRESETS.to_vec()
}

/// Shell constants; `lam=None` picks lambda automatically.
#[pyfunction]
#[pyo3(signature = (problem, r = 1.0, lam = None, mesh_n = 512))]
fn constants<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    r: f64,
    lam: Option<f64>,
    mesh_n: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = run_config(problem, r, lam, mesh_n)?;
    let (report, _) = py.detach(|| pipeline::run_constants(&cfg)).map_err(to_py)?;
    to_dict(py, &report)
}

/// Both positive solutions with certificates. Failure to find or certify
/// them is reported in the `status` field rather than raised.
#[pyfunction]
#[pyo3(signature = (problem, r = 1.0, lam = None, mesh_n = 512))]
fn solve<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    r: f64,
    lam: Option<f64>,
    mesh_n: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = run_config(problem, r, lam, mesh_n)?;
    let report = py.detach(|| pipeline::run_solve(&cfg)).map_err(to_py)?;
    to_dict(py, &report)
}

#[pyfunction]
#[pyo3(signature = (problem, lambdas, r = 1.0, mesh_n = 512))]
fn sweep<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    lambdas: Vec<f64>,
    r: f64,
    mesh_n: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = run_config(problem, r, None, mesh_n)?;
    let report = py
        .detach(|| pipeline::run_sweep(&cfg, &lambdas, None))
        .map_err(to_py)?;
    to_dict(py, &report.rows)
}

/// `lambda_bar` for the problem and radius `r`.
#[pyfunction]
#[pyo3(signature = (problem, r = 1.0, mesh_n = 512))]
fn lambda_bar(py: Python<'_>, problem: &PyProblem, r: f64, mesh_n: usize) -> PyResult<f64> {
    let cfg = run_config(problem, r, None, mesh_n)?;
    py.detach(|| pipeline::lambda_bar(&cfg)).map_err(to_py)
}

/// Quadrature nodes of the default rule with `mesh_n` points.
#[pyfunction]
#[pyo3(signature = (eta, mesh_n = 512))]
fn nodes(eta: f64, mesh_n: usize) -> PyResult<Vec<f64>> {
    let quad = SolveOptions::default()
        .quad
        .with_mesh_n(mesh_n)
        .map_err(to_py)?;
    Ok(quad.rule(eta).map_err(to_py)?.nodes().to_vec())
}

/// Certificate for de-shifted `values` given at `nodes(problem.eta, mesh_n)`.
#[pyfunction]
#[pyo3(signature = (problem, lam, values, mesh_n = 512, fine_factor = 2))]
fn certify<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    lam: f64,
    values: Vec<f64>,
    mesh_n: usize,
    fine_factor: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let quad = SolveOptions::default()
        .quad
        .with_mesh_n(mesh_n)
        .map_err(to_py)?;
    let rule = quad.rule(problem.0.eta()).map_err(to_py)?;
    if values.len() != rule.len() {
        return Err(PyValueError::new_err(format!(
            "expected {} values, got {}",
            rule.len(),
            values.len()
        )));
    }
    let cert = certify_deshifted(&problem.0, lam, &rule, &values, fine_factor).map_err(to_py)?;
    to_dict(py, &cert)
}

/// Runs `command` ("constants", "solve") on a TOML config string.
#[pyfunction]
fn run_toml<'py>(py: Python<'py>, text: &str, command: &str) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = RunConfig::from_toml_str(text).map_err(to_py)?;
    cfg.output = OutputSection::default();
    match command {
        "constants" => {
            let (report, _) = py.detach(|| pipeline::run_constants(&cfg)).map_err(to_py)?;
            to_dict(py, &report)
        }
        "solve" => {
            let report = py.detach(|| pipeline::run_solve(&cfg)).map_err(to_py)?;
            to_dict(py, &report)
        }
        other => Err(PyValueError::new_err(format!(
            "unknown command {other:?}; use \"constants\" or \"solve\""
        ))),
    }
}

#[pymodule]
fn tribvp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGreenKernel>()?;
    m.add_class::<PyExpr>()?;
    m.add_class::<PyProblem>()?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(constants, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_bar, m)?)?;
    m.add_function(wrap_pyfunction!(nodes, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(run_toml, m)?)?;
    m.add("TribvpError", m.py().get_type::<TribvpError>())?;
    m.add(
        "InfeasibleShellError",
        m.py().get_type::<InfeasibleShellError>(),
    )?;
    m.add("NotFoundError", m.py().get_type::<NotFoundError>())?;
    Ok(())
}
