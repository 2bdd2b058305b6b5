"""Per-criterion summary for the acceptance suite.

Acceptance tests carry ``@pytest.mark.criterion(n, "label")``.  A criterion
passes when every test bearing its number passes; an expected failure counts
as FAIL (the analysis lives in the decisions ledger).
"""

from collections import OrderedDict

import pytest

_RESULTS = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, label): acceptance criterion number and label")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, label = mark.args
    entry = _RESULTS.setdefault(n, {"label": label, "status": [], "notes": []})
    if rep.when == "call":
        if hasattr(rep, "wasxfail"):
            entry["status"].append("xfail")
            entry["notes"].append(f"{item.name}: expected failure ({rep.wasxfail})")
        else:
            entry["status"].append(rep.outcome)
        for key, value in item.user_properties:
            entry["notes"].append(f"{key}={value}")
    elif rep.failed:
        entry["status"].append("failed")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_RESULTS):
        e = _RESULTS[n]
        ok = bool(e["status"]) and all(s == "passed" for s in e["status"])
        tr.write_line(f"criterion {n:>2} {'PASS' if ok else 'FAIL'}  {e['label']}")
        for note in e["notes"]:
            tr.write_line(f"      {note}")
