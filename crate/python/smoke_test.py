"""Smoke test for the Python bindings.

    pip install maturin
    maturin develop -m crates/py/Cargo.toml --release
    python python/smoke_test.py
"""

import math
import sys

import boussinesq as bq

RUN = """
[run]
n = 32
t_final = 0.1
nu = 1e-3
kappa = 1e-2
"""

SWEEP = """
[run]
n = 32
t_final = 0.1
kappa = 1e-2

[sweep]
nu_list = [1e-2, 1e-3, 1e-4]
perturb_theta = 1.0
mollifier_cutoffs = [2, 4, 8]
gronwall_cutoff = 4
workers = 1
"""


def main():
    err, div = bq.biot_savart_check(64, 1)
    assert err < 1e-12 and div < 1e-13, (err, div)

    lhs, rhs = bq.arithmetic_bound(1.0, math.e)
    assert abs(lhs - rhs) < 1e-14
    assert bq.r_star(0.0) == 1.0
    assert abs(bq.nu_tilde_limit() - 1.0 / (math.sqrt(5.0) - 1.0)) < 1e-15
    assert bq.theta_stability_bound(1.0, 1.0, 1.0) == math.exp(2.0)

    assert bq.config_kind(RUN) == "run"
    assert bq.config_kind(SWEEP) == "sweep"
    try:
        bq.config_kind(RUN.replace("kappa = 1e-2", "kappa = 0"))
    except ValueError as e:
        assert "kappa > 0" in str(e)
    else:
        raise AssertionError("kappa = 0 accepted")

    data, same = bq.checkpoint_roundtrip(RUN)
    assert same and data[:6] == b"BQCHK1"

    report, rows = bq.run(RUN)
    assert report["abort"] is None
    assert all(v["passed"] for v in report["invariants"]["verdicts"])
    assert rows[-1]["t"] == 0.1

    sweep = bq.sweep(SWEEP)
    sups = [run["omega_gaps"][1]["sup"] for run in sweep["runs"]]
    assert sups[0] > sups[1] > sups[2] > 0.0, sups
    verdicts = bq.check_report(sweep)
    failed = [name for name, passed, masked in verdicts if not (passed or masked)]
    assert not failed, failed

    print("python smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
