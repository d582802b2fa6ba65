//! Python bindings: direct access to the core solvers plus the scenario
//! runner, which returns artifacts in memory instead of writing files.

use std::collections::BTreeMap;

use num_complex::Complex64 as c64;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

use floquet_edge::analysis::{degenerate_limit, detect_edge_pair};
use floquet_edge::capacitance::{boundary_capacitance, dilute_capacitance, CapacitanceMatrix};
use floquet_edge::floquet::{monodromy, quasifrequencies, IntegratorOptions};
use floquet_edge::geometry::{build_supercell_chain, Materials, ResonatorSystem};
use floquet_edge::hill::{HillSystem, Modulation, PhasePreset};
use floquet_edge::perturbation::{predict_split, DegeneracyTreatment};
use floquet_edge_cli::{execute, prepare, CliError, Command, ScenarioConfig};

fn numerical(e: floquet_edge::Error) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn cli(e: CliError) -> PyErr {
    match e {
        CliError::Schema(_) => PyValueError::new_err(e.to_string()),
        CliError::Numerical(_) => PyRuntimeError::new_err(e.to_string()),
        CliError::Io { .. } => PyOSError::new_err(e.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, value: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match value {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, to_py(py, v)?)?;
            }
            dict.into_any()
        }
    })
}

fn chain(cells: usize, radius: f64, gamma: f64) -> PyResult<ResonatorSystem> {
    Ok(build_supercell_chain(cells, radius).map_err(numerical)?.with_gamma(gamma))
}

fn edge_capacitance(system: &ResonatorSystem, merge: bool) -> PyResult<(CapacitanceMatrix, [usize; 2])> {
    let c = dilute_capacitance(system).map_err(numerical)?;
    let pair = detect_edge_pair(&c).map_err(numerical)?.pair;
    let c = if merge { degenerate_limit(&c, pair).map_err(numerical)? } else { c };
    Ok((c, pair))
}

/// Resonator centers of a chain of `cells` supercells.
#[pyfunction]
#[pyo3(signature = (cells, radius = 0.1))]
fn supercell_centers(cells: usize, radius: f64) -> PyResult<Vec<[f64; 3]>> {
    Ok(build_supercell_chain(cells, radius).map_err(numerical)?.centers)
}

/// Capacitance matrix of spheres at `gamma * centers`.
#[pyfunction]
#[pyo3(signature = (centers, radius, gamma = 0.025, backend = "dilute", quad_order = 12))]
fn capacitance(centers: Vec<[f64; 3]>, radius: f64, gamma: f64, backend: &str, quad_order: usize) -> PyResult<Vec<Vec<f64>>> {
    let system = ResonatorSystem::new(centers, radius, gamma, Materials::default()).map_err(numerical)?;
    let c = match backend {
        "dilute" => dilute_capacitance(&system),
        "boundary" => boundary_capacitance(&system, quad_order),
        other => return Err(PyValueError::new_err(format!("unknown backend {other:?}"))),
    }
    .map_err(numerical)?;
    Ok(c.rows())
}

/// Folded quasifrequencies of a modulated supercell chain.
#[pyfunction]
#[pyo3(signature = (cells, epsilon, omega = 2.0, gamma = 0.025, steps = 2000))]
fn floquet_spectrum(cells: usize, epsilon: f64, omega: f64, gamma: f64, steps: usize) -> PyResult<Vec<c64>> {
    let system = chain(cells, 0.1, gamma)?;
    let c = dilute_capacitance(&system).map_err(numerical)?;
    let m = Modulation::uniform(omega, epsilon, PhasePreset::Supercell.phases_for(&system)).map_err(numerical)?;
    let hill = HillSystem::new(&c, &system, m).map_err(numerical)?;
    let x = monodromy(&hill, &IntegratorOptions::fast(steps)).map_err(numerical)?;
    Ok(quasifrequencies(&x).map_err(numerical)?.modes.iter().map(|q| q.value()).collect())
}

/// Second-order prediction for the edge pair of a supercell chain.
#[pyfunction]
#[pyo3(signature = (cells, epsilon, omega = 2.0, gamma = 0.025, degenerate = true))]
fn predict_edge_split<'py>(py: Python<'py>, cells: usize, epsilon: f64, omega: f64, gamma: f64, degenerate: bool) -> PyResult<Bound<'py, PyAny>> {
    let system = chain(cells, 0.1, gamma)?;
    let (c, pair) = edge_capacitance(&system, degenerate)?;
    let m = Modulation::uniform(omega, epsilon, PhasePreset::Supercell.phases_for(&system)).map_err(numerical)?;
    let treatment = if degenerate { DegeneracyTreatment::Merge } else { DegeneracyTreatment::Physical };
    let pred = predict_split(&c, &system, &m, (pair[0], pair[1]), treatment, None).map_err(numerical)?;
    to_py(py, &pred.to_json())
}

/// Run a scenario command on a JSON config; returns `{name: contents}`.
#[pyfunction]
#[pyo3(signature = (config, command, seed = None))]
fn run_scenario(config: &str, command: &str, seed: Option<u64>) -> PyResult<BTreeMap<String, String>> {
    let command: Command = command.parse().map_err(cli)?;
    let config = prepare(ScenarioConfig::from_json(config).map_err(cli)?, seed, None);
    let artifacts = execute(&config, command).map_err(cli)?;
    Ok(artifacts.into_iter().map(|a| (a.name, a.contents)).collect())
}

#[pymodule]
#[pyo3(name = "floquet_edge")]
fn init(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("SCHEMA", floquet_edge_cli::SCHEMA)?;
    m.add_function(wrap_pyfunction!(supercell_centers, m)?)?;
    m.add_function(wrap_pyfunction!(capacitance, m)?)?;
    m.add_function(wrap_pyfunction!(floquet_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(predict_edge_split, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
