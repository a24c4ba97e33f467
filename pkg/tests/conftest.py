import re
from collections import OrderedDict

import numpy as np
import pytest

_CRITERIA: "OrderedDict[int, list]" = OrderedDict()
_PATTERN = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")


def pytest_collection_modifyitems(items):
    for item in items:
        m = _PATTERN.search(item.nodeid)
        if m:
            _CRITERIA.setdefault(int(m.group(1)), [])


def pytest_runtest_logreport(report):
    m = _PATTERN.search(report.nodeid)
    if not m:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _CRITERIA.setdefault(int(m.group(1)), []).append((report.nodeid, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        results = _CRITERIA[num]
        if not results:
            continue
        ok = all(outcome == "passed" for _, outcome in results)
        line = f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}"
        if not ok:
            failed = [nid.split("::")[-1] for nid, outcome in results if outcome != "passed"]
            line += "  (" + ", ".join(failed) + ")"
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
