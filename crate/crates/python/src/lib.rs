//! Python bindings: molecule conversions, similarity, multi-objective
//! utilities, AUC metrics and whole optimization runs.

use std::path::PathBuf;

use molga::engine::{preset_names, ConfigSources, Engine, EngineError, RunConfig};
use molga::fingerprint::{default_fingerprint, tanimoto};
use molga::metrics;
use molga::molgraph::{self, Molecule};
use molga::pareto::{self, ObjectivePoint};
use molga::selfies;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse(smiles: &str) -> PyResult<Molecule> {
    molgraph::parse_smiles(smiles).map_err(value_error)
}

/// Canonical SMILES of `smiles`; raises ValueError if it does not parse.
#[pyfunction]
fn canonical_smiles(smiles: &str) -> PyResult<String> {
    Ok(parse(smiles)?.to_smiles())
}

#[pyfunction]
fn is_valid_smiles(smiles: &str) -> bool {
    molgraph::parse_smiles(smiles).is_ok()
}

#[pyfunction]
fn smiles_to_selfies(smiles: &str) -> PyResult<String> {
    selfies::encode_selfies(&parse(smiles)?).map_err(value_error)
}

/// Decodes any token string in the SELFIES alphabet to canonical SMILES.
#[pyfunction]
fn selfies_to_smiles(text: &str) -> PyResult<String> {
    Ok(selfies::decode_selfies(text).map_err(value_error)?.to_smiles())
}

/// Molecular formula in Hill order, e.g. "C2H6O".
#[pyfunction]
fn molecular_formula(smiles: &str) -> PyResult<String> {
    Ok(molgraph::molecular_formula(&parse(smiles)?).to_string())
}

/// Tanimoto similarity of the default Morgan fingerprints.
#[pyfunction]
fn similarity(a: &str, b: &str) -> PyResult<f64> {
    let (fa, fb) = (default_fingerprint(&parse(a)?), default_fingerprint(&parse(b)?));
    tanimoto(&fa, &fb).map_err(value_error)
}

fn points(values: Vec<Vec<f64>>) -> PyResult<Vec<ObjectivePoint>> {
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| ObjectivePoint::new(v, i.to_string()).map_err(value_error))
        .collect()
}

/// Indices of the non-dominated points (all objectives maximized).
#[pyfunction]
fn pareto_front(values: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
    pareto::frontier_indices(&points(values)?).map_err(value_error)
}

/// Volume dominated by `values` inside the unit cube, reference at the origin.
#[pyfunction]
fn hypervolume(values: Vec<Vec<f64>>) -> PyResult<f64> {
    let refs: Vec<&[f64]> = values.iter().map(Vec::as_slice).collect();
    pareto::hypervolume(&refs).map_err(value_error)
}

/// Top-k AUC of a per-call fitness sequence; `None` marks a failed call.
#[pyfunction]
#[pyo3(signature = (fitness, k, budget))]
fn topk_auc(fitness: Vec<Option<f64>>, k: usize, budget: usize) -> PyResult<f64> {
    metrics::topk_auc(&fitness, k, budget).map_err(value_error)
}

#[pyfunction]
fn structural_diversity(smiles: Vec<String>) -> PyResult<f64> {
    let fps = smiles
        .iter()
        .map(|s| parse(s).map(|m| default_fingerprint(&m)))
        .collect::<PyResult<Vec<_>>>()?;
    metrics::structural_diversity(&fps).map_err(value_error)
}

#[pyfunction]
fn presets() -> Vec<&'static str> {
    preset_names()
}

fn engine_error(e: EngineError) -> PyErr {
    match e {
        EngineError::Config(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Runs an optimization to completion and returns its summary as a dict.
///
/// `config` is TOML text layered on top of `presets`; `overrides` are
/// `key=value` strings applied last. With `out`, the run directory is
/// written there.
#[pyfunction]
#[pyo3(signature = (config=None, presets=Vec::new(), overrides=Vec::new(), out=None))]
fn run<'py>(
    py: Python<'py>,
    config: Option<&str>,
    presets: Vec<String>,
    overrides: Vec<String>,
    out: Option<PathBuf>,
) -> PyResult<Bound<'py, PyAny>> {
    let sources = ConfigSources {
        presets,
        text: config.map(str::to_string),
        overrides,
        ..Default::default()
    };
    let cfg = RunConfig::load(&sources).map_err(value_error)?;
    let summary = py
        .detach(move || -> Result<_, EngineError> {
            let mut engine = Engine::new(cfg, None)?;
            if let Some(dir) = &out {
                engine.attach_run_dir(dir)?;
            }
            engine.run()
        })
        .map_err(engine_error)?;
    let json = serde_json::to_string(&summary).expect("summary serializes");
    py.import("json")?.call_method1("loads", (json,))
}

#[pymodule]
pub fn molga_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(canonical_smiles, m)?)?;
    m.add_function(wrap_pyfunction!(is_valid_smiles, m)?)?;
    m.add_function(wrap_pyfunction!(smiles_to_selfies, m)?)?;
    m.add_function(wrap_pyfunction!(selfies_to_smiles, m)?)?;
    m.add_function(wrap_pyfunction!(molecular_formula, m)?)?;
    m.add_function(wrap_pyfunction!(similarity, m)?)?;
    m.add_function(wrap_pyfunction!(pareto_front, m)?)?;
    m.add_function(wrap_pyfunction!(hypervolume, m)?)?;
    m.add_function(wrap_pyfunction!(topk_auc, m)?)?;
    m.add_function(wrap_pyfunction!(structural_diversity, m)?)?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
