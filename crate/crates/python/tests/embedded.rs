//! Drives the bindings through an embedded interpreter.

use std::ffi::CString;
use std::sync::Once;

use pyo3::prelude::*;
use pyo3::types::PyDict;
use rbsos_py::rbsos_py;

static INIT: Once = Once::new();

fn init() {
    INIT.call_once(|| {
        pyo3::append_to_inittab!(rbsos_py);
        Python::initialize();
    });
}

fn fixture(name: &str) -> String {
    format!("{}/../core/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

/// Runs `code` with `fixture(name)` available as `path`.
fn run(code: &str, fixture_name: &str) {
    init();
    Python::attach(|py| {
        let globals = PyDict::new(py);
        globals.set_item("path", fixture(fixture_name)).unwrap();
        let code = CString::new(code).unwrap();
        if let Err(e) = py.run(&code, Some(&globals), None) {
            e.print(py);
            panic!("python code failed: {e}");
        }
    });
}

#[test]
fn smoke_script_passes() {
    init();
    let script = format!("{}/../../python/smoke_test.py", env!("CARGO_MANIFEST_DIR"));
    let source = std::fs::read_to_string(&script).unwrap();
    Python::attach(|py| {
        let globals = PyDict::new(py);
        globals.set_item("__file__", &script).unwrap();
        globals.set_item("__name__", "__main__").unwrap();
        let code = CString::new(source).unwrap();
        if let Err(e) = py.run(&code, Some(&globals), None) {
            e.print(py);
            panic!("smoke script failed: {e}");
        }
    });
}

#[test]
fn problem_accessors() {
    run(
        r#"
import rbsos_py
p = rbsos_py.Problem.load(path)
assert (p.m, p.n) == (1, 1)
assert p.feasible_point == [0.0, 0.0]
assert p.is_lower_solution([0.0], [0.0])
assert not p.is_lower_solution([0.0], [-1.0])
assert abs(p.objective([1.0], [0.0]) - 2.0) < 1e-12
"#,
        "ep2.json",
    );
}

#[test]
fn hierarchy_report_round_trips_through_json() {
    run(
        r#"
import json
import rbsos_py
h = rbsos_py.Problem.load(path).solve(kmin=2, kmax=4)
assert [l[0] for l in h.levels] == [2, 4]
assert h.levels[0][1] is None and h.levels[0][2] == "rejected"
assert h.monotone and h.kappa == -1.0
data = json.loads(h.to_json())
assert data["levels"][1]["k"] == 4
assert abs(h.best_bound + 2.0) < 1e-3
"#,
        "ep3.json",
    );
}

#[test]
fn errors_become_python_exceptions() {
    run(
        r#"
import rbsos_py
try:
    rbsos_py.Problem.from_json("{")
except ValueError:
    pass
else:
    raise AssertionError("malformed JSON accepted")
try:
    rbsos_py.sos_decomposition([[1.0, 0.0], [0.0, -1.0]], [[0], [1]])
except ValueError:
    pass
else:
    raise AssertionError("indefinite Gram matrix accepted")
p = rbsos_py.Problem.load(path)
try:
    p.is_robust_feasible([0.0, 1.0], [0.0])
except ValueError:
    pass
else:
    raise AssertionError("wrong dimensions accepted")
"#,
        "ep2.json",
    );
}

#[test]
fn farkas_sampling_reports_counts() {
    run(
        r#"
import rbsos_py
s = rbsos_py.FarkasSystem.load(path)
holds, feasible = s.check_implication([1.0], 2.0, samples=200, seed=3)
assert not holds
again = rbsos_py.FarkasSystem.from_json(s.to_json())
assert again.to_json() == s.to_json()
"#,
        "trivial_farkas.json",
    );
}
