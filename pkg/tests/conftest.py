from __future__ import annotations

import os
import re
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from hadeq import Euclidean, Hyperboloid, StarTree  # noqa: E402

ALL_SPACES = {
    "euclidean3": lambda: Euclidean(3),
    "hyperboloid2": lambda: Hyperboloid(2),
    "star_tree5": lambda: StarTree(5),
}

_CRITERION = re.compile(r"test_criterion_(\d+)_")
_acceptance: dict[int, list[tuple[str, str]]] = {}


@pytest.fixture(params=sorted(ALL_SPACES))
def space(request):
    return ALL_SPACES[request.param]()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if m is None or "test_acceptance" not in report.nodeid:
        return
    if report.when == "call" or report.outcome != "passed":
        _acceptance.setdefault(int(m.group(1)), []).append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_acceptance):
        runs = _acceptance[n]
        ok = all(outcome == "passed" for _, outcome in runs)
        names = ", ".join(name for name, _ in runs)
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  ({names})")
