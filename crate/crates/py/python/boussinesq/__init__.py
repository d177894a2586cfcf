"""Boussinesq inviscid-limit experiments.

Reports come back from the native module as JSON text and are decoded here.
"""

import csv
import io
import json

from . import _core
from ._core import (
    BoussinesqError,
    arithmetic_bound,
    biot_savart_check,
    checkpoint_roundtrip,
    config_kind,
    nu_tilde_limit,
    r_star,
    theta_stability_bound,
)

__all__ = [
    "BoussinesqError",
    "arithmetic_bound",
    "biot_savart_check",
    "check_report",
    "checkpoint_roundtrip",
    "config_kind",
    "nu_tilde_limit",
    "r_star",
    "run",
    "sweep",
    "theta_stability_bound",
]


def run(config_text):
    """Run a `[run]` configuration; returns `(report, trace_rows)`."""
    report, trace = _core.run(config_text)
    rows = [{k: float(v) for k, v in row.items()} for row in csv.DictReader(io.StringIO(trace))]
    return json.loads(report)["body"], rows


def sweep(config_text):
    """Run a `[sweep]` configuration; returns the decoded report."""
    return json.loads(_core.sweep(config_text))["body"]


def check_report(report):
    """Re-evaluate a report (dict or JSON text); returns `(name, passed, masked)` tuples."""
    if not isinstance(report, str):
        report = json.dumps({"schema_version": 1, "kind": "sweep", "body": report})
    return _core.check_report(report)
