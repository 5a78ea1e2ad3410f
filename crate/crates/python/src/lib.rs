//! Python bindings. Vectors cross the boundary as lists of floats, matrices
//! as lists of rows.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use unrolldiff::descriptor::{run_demo, Descriptor};
use unrolldiff::experiment::{derive_seed, generate_instance, ExperimentProblem, Variant};
use unrolldiff::generate::GeneratedInstance;
use unrolldiff::linalg::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use unrolldiff::{Error, Matrix, Vector};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Convergence { .. } | Error::Contraction { .. } | Error::Singular { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn problem_arg(name: &str) -> PyResult<ExperimentProblem> {
    match name {
        "lasso" => Ok(ExperimentProblem::Lasso),
        "logistic" => Ok(ExperimentProblem::Logistic),
        "quad" => Ok(ExperimentProblem::Quad),
        _ => Err(PyValueError::new_err(format!("unknown problem {name:?}; expected lasso, logistic or quad"))),
    }
}

fn variant_arg(name: &str) -> PyResult<Variant> {
    Variant::ALL
        .into_iter()
        .find(|v| v.name() == name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown variant {name:?}")))
}

fn instance(problem: &str, seed: u64) -> PyResult<GeneratedInstance> {
    generate_instance(problem_arg(problem)?, seed, None).map_err(py_err)
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err("ragged matrix rows"));
    }
    Matrix::from_shape_vec((n, m), rows.concat()).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Runs one variant from a warm start; returns the derivative trace.
fn unrolled(
    problem: &str,
    seed: u64,
    variant: &str,
    iterations: usize,
    warm_radius: f64,
) -> PyResult<(GeneratedInstance, unrolldiff::JvpTrace)> {
    let g = instance(problem, seed)?;
    let v = variant_arg(variant)?;
    let p = &g.problem;
    let x0 = unrolldiff::warm_start(p, &g.x_star, warm_radius).map_err(py_err)?;
    let sched = v.schedule(p.kind(), p.lipschitz(), p.strong_convexity(), derive_seed(g.seed, &[v.index()]));
    let t =
        unrolldiff::unroll_from(p, &x0, &Vector::zeros(p.dim()), &sched, &g.direction, iterations).map_err(py_err)?;
    Ok((g, t))
}

/// Draws an instance; returns a dict with the solution and problem constants.
#[pyfunction]
#[pyo3(signature = (problem, seed=0))]
fn generate(py: Python<'_>, problem: &str, seed: u64) -> PyResult<Py<PyDict>> {
    let g = instance(problem, seed)?;
    let d = PyDict::new(py);
    d.set_item("x_star", g.x_star.to_vec())?;
    d.set_item("lipschitz", g.problem.lipschitz())?;
    d.set_item("strong_convexity", g.problem.strong_convexity())?;
    d.set_item("reg", g.problem.reg())?;
    d.set_item("support_size", g.assumptions.support_size)?;
    d.set_item("nd_margin", g.assumptions.nd_margin)?;
    d.set_item("rpd_margin", g.assumptions.rpd_margin)?;
    d.set_item("seed", g.seed)?;
    Ok(d.unbind())
}

/// `‖x_k − x*‖` for one variant, `k = 0..=iterations`.
#[pyfunction]
#[pyo3(signature = (problem, seed=0, variant="pgd_fixed", iterations=3000, warm_radius=1e-2))]
fn solve(problem: &str, seed: u64, variant: &str, iterations: usize, warm_radius: f64) -> PyResult<Vec<f64>> {
    let (g, t) = unrolled(problem, seed, variant, iterations, warm_radius)?;
    Ok(t.primal_errors(&g.x_star))
}

/// Primal and derivative error curves against the implicit derivative.
#[pyfunction]
#[pyo3(signature = (problem, seed=0, variant="pgd_fixed", iterations=3000, warm_radius=1e-2))]
fn diff_unroll(
    problem: &str,
    seed: u64,
    variant: &str,
    iterations: usize,
    warm_radius: f64,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let (g, t) = unrolled(problem, seed, variant, iterations, warm_radius)?;
    let p = &g.problem;
    let truth = unrolldiff::implicit_jvp_pgd(p, &g.x_star, 1.0 / p.lipschitz(), &g.direction).map_err(py_err)?;
    Ok((t.primal_errors(&g.x_star), t.derivative_errors(&truth.dpsi_dot)))
}

/// `Dψ·u̇` by implicit differentiation; the doubled APG system if `beta` is given.
#[pyfunction]
#[pyo3(signature = (problem, seed=0, alpha_scale=1.0, beta=None))]
fn diff_implicit(problem: &str, seed: u64, alpha_scale: f64, beta: Option<f64>) -> PyResult<Vec<f64>> {
    let g = instance(problem, seed)?;
    let p = &g.problem;
    let alpha = alpha_scale / p.lipschitz();
    let sol = match beta {
        Some(b) => unrolldiff::implicit_jvp_apg(p, &g.x_star, alpha, b, &g.direction),
        None => unrolldiff::implicit_jvp_pgd(p, &g.x_star, alpha, &g.direction),
    }
    .map_err(py_err)?;
    Ok(sol.dpsi_dot.to_vec())
}

#[pyfunction]
fn spectral_radius(rows: Vec<Vec<f64>>) -> PyResult<f64> {
    Ok(unrolldiff::spectral_radius(&matrix(rows)?, DEFAULT_TOL, DEFAULT_MAX_ITER).map_err(py_err)?.radius)
}

/// Tail log-linear fit; returns `(rate, intercept, residual)`.
#[pyfunction]
#[pyo3(signature = (errors, tail_fraction=0.3))]
fn estimate_rate(errors: Vec<f64>, tail_fraction: f64) -> PyResult<(f64, f64, f64)> {
    let r = unrolldiff::estimate_rate(&errors, tail_fraction).map_err(py_err)?;
    Ok((r.rate, r.intercept, r.residual))
}

/// `x_{k+1} = (B_k + C_k) x_k + d_k` from textual descriptors.
#[pyfunction]
#[pyo3(signature = (b, e0, c="zero", d="zero", horizon=300))]
fn recursion_demo(py: Python<'_>, b: &str, e0: Vec<f64>, c: &str, d: &str, horizon: usize) -> PyResult<Py<PyDict>> {
    let parse = |s: &str| Descriptor::parse(s).map_err(py_err);
    let report = run_demo(&parse(b)?, &parse(c)?, &parse(d)?, &Vector::from(e0), horizon).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("limit", report.limit)?;
    out.set_item("limit_radius", report.limit_radius)?;
    out.set_item("final_error", report.final_error)?;
    out.set_item("rate", report.rate.map(|r| r.rate))?;
    out.set_item("errors", report.errors)?;
    Ok(out.unbind())
}

#[pymodule]
#[pyo3(name = "unrolldiff")]
fn unrolldiff_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(diff_unroll, m)?)?;
    m.add_function(wrap_pyfunction!(diff_implicit, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_radius, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_rate, m)?)?;
    m.add_function(wrap_pyfunction!(recursion_demo, m)?)?;
    Ok(())
}
