import sys

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(mod.CRITERIA):
        if n not in results:
            terminalreporter.write_line(f"criterion {n:2d} NOT RUN  {mod.CRITERIA[n]}")
            continue
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {mod.CRITERIA[n]}: {detail}")
