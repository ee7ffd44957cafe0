"""Acceptance gate: every stated criterion at its stated tolerance.

The full suite is executed once per session; each test asserts one
criterion's report.  Expect a long run: the KdV-residual field alone is
~120k operator evaluations.
"""

import json

import pytest

from stepkdv import acceptance


@pytest.fixture(scope="session")
def reports():
    out = acceptance.run_all(verbose=True)
    return {r["id"]: r for r in out["checks"]}


def _explain(rep):
    return json.dumps(rep["measured"], indent=1, default=str)


@pytest.mark.parametrize("check_id", sorted(acceptance.SUITES["all"]))
def test_acceptance_criterion(reports, check_id):
    rep = reports[check_id]
    assert rep["passed"], f"criterion {check_id} ({rep['name']}):\n" \
                          + _explain(rep)
