from __future__ import annotations

import re

import numpy as np
import pytest

from cavbistab.params import collective, laboratory_params

CRITERION_RE = re.compile(r"test_criterion_(\d+)_")


@pytest.fixture
def lab():
    """Laboratory parameters: g_N = 1.2 kappa, Gamma = 0.0022 kappa, N = 2e5."""
    return collective(1.2, 0.0022, 200_000)


@pytest.fixture
def lab_physical():
    return laboratory_params()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion."""
    rows = {}
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py" not in nodeid:
                continue
            m = CRITERION_RE.search(nodeid)
            if not m:
                continue
            if rep.when != "call" and rep.passed:
                continue
            props = dict(getattr(rep, "user_properties", []))
            status = "PASS" if rep.passed else "FAIL"
            num = int(m.group(1))
            if num in rows and rows[num][0] == "FAIL":
                continue
            rows[num] = (status, props.get("title", nodeid.split("::")[-1]), props.get("detail", ""))
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(rows):
        status, title, detail = rows[num]
        line = f"{status} criterion {num:>2}: {title}"
        if detail:
            line += f" | {detail}"
        terminalreporter.write_line(line)
