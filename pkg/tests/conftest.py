import math

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("repo", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("repo")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def angle_between(u, v):
    return math.acos(max(-1.0, min(1.0, float(np.dot(u, v)))))


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []
_CONFIG = {}


def pytest_configure(config):
    _CONFIG["config"] = config


def report_line(line: str):
    """Record an acceptance line and show it immediately, bypassing capture."""
    ACCEPTANCE_LINES.append(line)
    tr = _CONFIG["config"].pluginmanager.get_plugin("terminalreporter")
    if tr is not None:
        tr.ensure_newline()
        tr.write_line(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
