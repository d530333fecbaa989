"""Smoke test for the rbsos_py extension module.

Build the extension and put it on the import path first:

    cargo build -p rbsos-py --features extension-module
    cp target/debug/librbsos_py.so python/rbsos_py.so
    python3 python/smoke_test.py
"""

import math
import pathlib
import sys

HERE = pathlib.Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))

import rbsos_py  # noqa: E402

FIXTURES = HERE.parent / "crates" / "core" / "fixtures"


def check_farkas():
    disk = rbsos_py.FarkasSystem.load(str(FIXTURES / "disk_farkas.json"))
    assert disk.find_certificate([1.0, 0.0], 0.0) is None
    holds, feasible = disk.check_implication([1.0, 0.0], 0.0, samples=1000)
    assert holds and feasible > 0

    trivial = rbsos_py.FarkasSystem.load(str(FIXTURES / "trivial_farkas.json"))
    cert = trivial.find_certificate([-1.0], -1.0)
    assert cert is not None
    lambda0, lam = cert
    assert trivial.verify_certificate([-1.0], -1.0, lambda0, lam)


def check_problem():
    ep3 = rbsos_py.Problem.load(str(FIXTURES / "ep3.json"))
    assert (ep3.m, ep3.n) == (1, 1)
    assert ep3.single_level_sizes() == (6, 2)
    assert ep3.is_robust_feasible([0.0], [0.0])
    assert math.isclose(ep3.objective([0.0], [0.0]), -2.0)
    result = ep3.solve(kmin=4, kmax=4)
    k, value, status = result.levels[0]
    assert k == 4 and status == "optimal", result.levels
    assert abs(value + 2.0) < 1e-3, value
    assert ep3.certify([0.0], [0.0], k=6, kappa=-1.0)
    assert not ep3.certify([0.1], [0.0], k=4, kappa=-1.0)
    again = rbsos_py.Problem.from_json(ep3.to_json())
    assert again.to_json() == ep3.to_json()


def check_decomposition():
    parts = rbsos_py.sos_decomposition([[1.0, 1.0], [1.0, 1.0]], [[0], [1]])
    assert len(parts) == 1
    coeffs = dict((tuple(e), c) for e, c in parts[0])
    assert math.isclose(coeffs[(0,)], 1.0) and math.isclose(coeffs[(1,)], 1.0)


if __name__ == "__main__":
    check_farkas()
    check_problem()
    check_decomposition()
    print("smoke test passed")
