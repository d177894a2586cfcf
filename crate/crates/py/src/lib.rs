//! Python bindings. Reports cross the boundary as JSON text; `boussinesq/__init__.py` decodes them.

use boussinesq::dynamics::{simulate, InitialData, Perturbation};
use boussinesq::estimates::{arithmetic_bound as arith, nu_tilde_limit as limit, r_star as root, theta_stability_bound as theta_bound};
use boussinesq::harness::sweep as run_sweep;
use boussinesq::io::json::{run_report_json, RunReport};
use boussinesq::io::{checkpoint_bytes, checkpoint_from_bytes, parse_config_str, report_from_json, report_json, ConfigFile};
use boussinesq::torus::{biot_savart, divergence, rot, Grid, SpectralPlan};
use boussinesq::Error;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

pyo3::create_exception!(_core, BoussinesqError, PyException);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::InvalidResolution(_) => PyValueError::new_err(e.to_string()),
        other => BoussinesqError::new_err(other.to_string()),
    }
}

/// `"run"` or `"sweep"` for valid configuration text.
#[pyfunction]
fn config_kind(text: &str) -> PyResult<&'static str> {
    Ok(match parse_config_str(text).map_err(to_py)? {
        ConfigFile::Run(_) => "run",
        ConfigFile::Sweep(_) => "sweep",
    })
}

/// Runs a `[run]` configuration; returns the run report and the trace as CSV text.
#[pyfunction]
fn run(py: Python<'_>, text: &str) -> PyResult<(String, String)> {
    let ConfigFile::Run(config) = parse_config_str(text).map_err(to_py)? else {
        return Err(PyValueError::new_err("configuration describes a sweep"));
    };
    py.detach(move || {
        let out = simulate(&config)?;
        let report = RunReport {
            config,
            steps: out.steps,
            abort: out.abort,
            invariants: out.invariants,
            checkpoints: Vec::new(),
        };
        let json = String::from_utf8(run_report_json(&report)?).expect("JSON is UTF-8");
        let csv = String::from_utf8(boussinesq::io::trace_csv(&out.trace)?).expect("CSV is UTF-8");
        Ok((json, csv))
    })
    .map_err(to_py)
}

/// Runs a `[sweep]` configuration; returns the report as JSON text.
#[pyfunction]
fn sweep(py: Python<'_>, text: &str) -> PyResult<String> {
    let ConfigFile::Sweep(config) = parse_config_str(text).map_err(to_py)? else {
        return Err(PyValueError::new_err("configuration has no [sweep] table"));
    };
    py.detach(move || {
        let out = run_sweep(&config)?;
        Ok(String::from_utf8(report_json(&out.report)?).expect("JSON is UTF-8"))
    })
    .map_err(to_py)
}

/// Re-evaluates a report; returns `(name, passed, masked)` for every verdict.
#[pyfunction]
fn check_report(text: &str) -> PyResult<Vec<(String, bool, bool)>> {
    let mut report = report_from_json(text.as_bytes()).map_err(to_py)?;
    report.evaluate_checks().map_err(to_py)?;
    Ok(report.verdicts().into_iter().map(|v| (v.name, v.passed, v.masked)).collect())
}

/// `(a b, e^a + b ln b - b)`.
#[pyfunction]
fn arithmetic_bound(a: f64, b: f64) -> PyResult<(f64, f64)> {
    arith(a, b).map_err(to_py)
}

#[pyfunction]
fn theta_stability_bound(gap: f64, u: f64, theta: f64) -> f64 {
    theta_bound(gap, u, theta)
}

#[pyfunction]
fn r_star(nu_tilde: f64) -> f64 {
    root(nu_tilde)
}

#[pyfunction]
fn nu_tilde_limit() -> f64 {
    limit()
}

/// `(||rot BS(omega) - omega|| / ||omega||, max |div BS(omega)|)` for rough data on an `n` grid.
#[pyfunction]
fn biot_savart_check(n: usize, seed: u64) -> PyResult<(f64, f64)> {
    let grid = Grid::new(n).map_err(to_py)?;
    let s = boussinesq::dynamics::initial_state(grid, &InitialData::rough(seed), Perturbation::default(), 0.0, 1.0)
        .map_err(to_py)?;
    let u = biot_savart(&s.omega, [0.0, 0.0]).map_err(to_py)?;
    let err = rot(&u).sub(&s.omega).map_err(to_py)?.l2_norm() / s.omega.l2_norm();
    let div = SpectralPlan::new(grid).inverse(&divergence(&u)).map_err(to_py)?.max_abs();
    Ok((err, div))
}

/// Encodes the initial state of a run configuration as checkpoint bytes and decodes it again;
/// returns `(bytes, identical)`.
#[pyfunction]
fn checkpoint_roundtrip(text: &str) -> PyResult<(Vec<u8>, bool)> {
    let ConfigFile::Run(c) = parse_config_str(text).map_err(to_py)? else {
        return Err(PyValueError::new_err("configuration describes a sweep"));
    };
    let grid = Grid::new(c.n).map_err(to_py)?;
    let s = boussinesq::dynamics::initial_state(grid, &c.initial, Perturbation::default(), c.nu, c.kappa)
        .map_err(to_py)?;
    let bytes = checkpoint_bytes(&s);
    let back = checkpoint_from_bytes(&bytes).map_err(to_py)?;
    Ok((bytes, back == s))
}

#[pymodule]
fn _core(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("BoussinesqError", m.py().get_type::<BoussinesqError>())?;
    m.add_function(wrap_pyfunction!(config_kind, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(check_report, m)?)?;
    m.add_function(wrap_pyfunction!(arithmetic_bound, m)?)?;
    m.add_function(wrap_pyfunction!(theta_stability_bound, m)?)?;
    m.add_function(wrap_pyfunction!(r_star, m)?)?;
    m.add_function(wrap_pyfunction!(nu_tilde_limit, m)?)?;
    m.add_function(wrap_pyfunction!(biot_savart_check, m)?)?;
    m.add_function(wrap_pyfunction!(checkpoint_roundtrip, m)?)?;
    Ok(())
}
