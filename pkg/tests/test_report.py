import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from noetherlab.report import REPORT_KEYS, ConservationReport, convergence_ratios


def test_from_residuals_stats():
    r = ConservationReport.from_residuals("x", [3.0, -4.0], 5.0)
    assert r.max_residual == 4.0
    assert math.isclose(r.rms_residual, math.sqrt(12.5))
    assert r.samples == 2 and r.passed


def test_boundary_is_inclusive():
    assert ConservationReport.from_residuals("x", [1e-10], 1e-10).passed
    assert not ConservationReport.from_residuals("x", [1.0000001e-10], 1e-10).passed


def test_nonfinite_residuals_fail():
    r = ConservationReport.from_residuals("x", [0.0, np.nan], 1.0)
    assert not r.passed and r.max_residual == math.inf
    assert r.to_json()["max_residual"] == "inf"


def test_empty_residuals():
    r = ConservationReport.from_residuals("x", [], 1.0)
    assert r.samples == 0 and r.passed


def test_fails_clearly_margin():
    r = ConservationReport.from_residuals("x", [0.5], 0.01)
    assert r.fails_clearly() and not r.fails_clearly(margin=100)


def test_negative_residual_stats_rejected():
    with pytest.raises(ValueError):
        ConservationReport("x", 1.0, -1.0, 0.0, 1)


def test_json_roundtrip():
    r = ConservationReport.from_residuals("x", [1e-3, 2e-3], 1e-2).with_convergence([3.9, 4.1])
    doc = r.to_json()
    assert tuple(doc) == REPORT_KEYS
    back = ConservationReport.from_json(json.loads(json.dumps(doc)))
    assert back == r
    bad = dict(doc, **{"pass": False})
    with pytest.raises(ValueError):
        ConservationReport.from_json(bad)
    with pytest.raises(ValueError):
        ConservationReport.from_json({k: v for k, v in doc.items() if k != "samples"})


def test_line_format():
    r = ConservationReport.from_residuals("div", [2e-4], 1e-3).with_convergence([3.96])
    assert r.line() == "PASS  div: max=2.000e-04 tol=1.0e-03 n=1  ratios=3.960"
    assert r.renamed("other").name == "other"


def test_convergence_ratios():
    assert convergence_ratios([16.0, 4.0, 1.0]) == [4.0, 4.0]
    assert convergence_ratios([1.0, 0.0]) == [math.inf]


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50), st.floats(0, 1e6))
def test_pass_iff_max_within_tolerance(vals, tol):
    r = ConservationReport.from_residuals("p", vals, tol)
    assert r.passed == (max(abs(v) for v in vals) <= tol)
    assert r.rms_residual <= r.max_residual * (1 + 1e-12)
