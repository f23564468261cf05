import numpy as np
import pytest

from siadmm import gen_distreg, gen_lasso


@pytest.fixture(scope="session")
def lasso6():
    """Small instance shared by fast tests."""
    return gen_lasso(6, stream=np.random.default_rng(314))


@pytest.fixture(scope="session")
def lasso10():
    return gen_lasso(10, stream=np.random.default_rng(7))


@pytest.fixture(scope="session")
def distreg8():
    return gen_distreg(8, stream=np.random.default_rng(99))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    lines = []
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            if "test_acceptance" not in getattr(rep, "nodeid", ""):
                continue
            name = rep.nodeid.split("::")[-1]
            lines.append((name, "PASS" if status == "passed" else "FAIL"))
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name, verdict in sorted(lines):
            terminalreporter.write_line(f"{verdict}  {name}")
