use std::ffi::CString;

use pyo3::prelude::*;
use pyo3::types::PyDict;

/// Runs `code` with the module bound to `m`; the code asserts in Python.
fn check(code: &str) {
    Python::attach(|py| {
        let m = PyModule::new(py, "molga_py").unwrap();
        molga_py::molga_py(&m).unwrap();
        let globals = PyDict::new(py);
        globals.set_item("m", m).unwrap();
        let code = CString::new(code).unwrap();
        if let Err(e) = py.run(&code, Some(&globals), None) {
            e.print(py);
            panic!("python check failed: {e}");
        }
    });
}

#[test]
fn conversions() {
    check(
        r#"
assert m.canonical_smiles("OCC") == "CCO"
assert m.is_valid_smiles("c1ccccc1") and not m.is_valid_smiles("C1CC")
sf = m.smiles_to_selfies("CCO")
assert m.selfies_to_smiles(sf) == "CCO"
assert m.molecular_formula("CCO") == "C2H6O"
try:
    m.canonical_smiles("C(((")
    raise AssertionError("expected ValueError")
except ValueError as e:
    assert str(e)
"#,
    );
}

#[test]
fn similarity_and_diversity() {
    check(
        r#"
assert m.similarity("CCO", "CCO") == 1.0
assert 0.0 <= m.similarity("CCO", "c1ccccc1") < 0.5
assert m.structural_diversity(["CCO", "CCO"]) == 0.0
"#,
    );
}

#[test]
fn pareto_and_auc() {
    check(
        r#"
front = m.pareto_front([[0.5, 0.5], [0.2, 0.2], [0.9, 0.1]])
assert sorted(front) == [0, 2]
assert abs(m.hypervolume([[0.5, 0.5], [0.9, 0.1]]) - (0.25 + 0.4 * 0.1)) < 1e-12
assert m.topk_auc([0.5] * 10, 1, 10) == 0.5
assert abs(m.topk_auc([0.0] * 5 + [1.0] * 5, 1, 10) - 0.5) < 1e-12
try:
    m.topk_auc([0.5], 5, 2)
    raise AssertionError("expected ValueError")
except ValueError:
    pass
"#,
    );
}

#[test]
fn run_returns_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    check(&format!(
        r#"
assert "synthetic" in m.presets()
s = m.run(presets=["synthetic"], overrides=["budget=60", "ga.population_size=20"], out={out:?})
assert s["used"] <= 60 and s["budget"] == 60
assert 0.0 < s["metrics"]["top10_auc"] <= 1.0
try:
    m.run(presets=["synthetic"], overrides=["ga.mutation_rate=2"])
    raise AssertionError("expected ValueError")
except ValueError as e:
    assert "ga.mutation_rate" in str(e)
"#,
        out = out.display().to_string()
    ));
    assert!(out.join("summary.json").exists());
}
