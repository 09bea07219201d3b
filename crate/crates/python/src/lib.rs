//! Python bindings: scenario runs and studies from TOML text, file checks and
//! algebraic cone margins. Tables come back as plain lists and dicts.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use riccilab::config::ScenarioConfig;
use riccilab::drivers::{self, CSV_COLUMNS, VERSION};
use riccilab::pic::{margins, AlgebraicCurvature};
use riccilab::Error;

fn py_err(e: Error) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (v.to_string(),))
}

fn scenario(config: &str, seed: Option<u64>, resolution: Option<usize>) -> riccilab::Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::from_toml(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(r) = resolution {
        cfg = cfg.with_resolution(r);
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Package version.
#[pyfunction]
fn version() -> &'static str {
    VERSION
}

/// Text listing of domains, presets, studies, columns and constants.
#[pyfunction]
fn info() -> String {
    drivers::info()
}

/// Runs a scenario given as TOML text. Returns a dict with the diagnostics
/// column names, one dict per row (missing cells are None) and an optional
/// failure message. With `out` the run files are also written there.
#[pyfunction]
#[pyo3(signature = (config, seed=None, resolution=None, out=None))]
fn run<'py>(
    py: Python<'py>,
    config: &str,
    seed: Option<u64>,
    resolution: Option<usize>,
    out: Option<PathBuf>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = scenario(config, seed, resolution).map_err(py_err)?;
    if let Some(o) = &out {
        cfg.output.dir = Some(o.clone());
    }
    let res = py.detach(|| drivers::run(&cfg)).map_err(py_err)?;
    if let Some(o) = &out {
        drivers::write_run(o, &cfg, &res).map_err(py_err)?;
    }
    let d = PyDict::new(py);
    d.set_item("columns", CSV_COLUMNS.to_vec())?;
    let rows = serde_json::to_value(&res.rows).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    d.set_item("rows", json_to_py(py, &rows)?)?;
    d.set_item("failure", res.failure.map(|e| e.to_string()))?;
    Ok(d)
}

/// Runs the `[study]` section of a TOML config and returns the report as a
/// dict; `report["passed"]` tells whether all thresholds held.
#[pyfunction]
#[pyo3(signature = (config, seed=None))]
fn study<'py>(py: Python<'py>, config: &str, seed: Option<u64>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = scenario(config, seed, None).map_err(py_err)?;
    let rep = py.detach(|| drivers::study(&cfg)).map_err(py_err)?;
    let mut v = serde_json::to_value(&rep).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    v["passed"] = rep.passed().into();
    json_to_py(py, &v)
}

/// Same report as `riccilab check FILE`.
#[pyfunction]
#[pyo3(signature = (path, seed=0))]
fn check(py: Python<'_>, path: PathBuf, seed: u64) -> PyResult<String> {
    py.detach(|| drivers::check(&path, seed)).map_err(py_err)
}

/// Constant curvature tensor `k (d_ik d_jl - d_il d_jk)` as a flat list of
/// length n^4, index `((i n + j) n + k) n + l`.
#[pyfunction]
fn constant_curvature(n: usize, kappa: f64) -> Vec<f64> {
    AlgebraicCurvature::constant(n, kappa).r
}

/// Normalised PIC, PIC1 and PIC2 margins of an algebraic curvature tensor in
/// an orthonormal basis, given as a flat list of length n^4 with n >= 4.
#[pyfunction]
#[pyo3(signature = (n, r, seed=0))]
fn pic_margins(n: usize, r: Vec<f64>, seed: u64) -> PyResult<(f64, f64, f64)> {
    if n < 4 || r.len() != n.pow(4) {
        return Err(PyValueError::new_err(format!("need n >= 4 and n^4 entries, got n = {n}, {} entries", r.len())));
    }
    let m = margins(&AlgebraicCurvature::new(n, r), seed);
    Ok((m.pic.value, m.pic1.value, m.pic2.value))
}

#[pymodule]
fn riccilab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", VERSION)?;
    m.add_function(wrap_pyfunction!(version, m)?)?;
    m.add_function(wrap_pyfunction!(info, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(study, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(constant_curvature, m)?)?;
    m.add_function(wrap_pyfunction!(pic_margins, m)?)?;
    Ok(())
}
