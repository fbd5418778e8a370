import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    lines = [v for rep in terminalreporter.stats.get("passed", []) + terminalreporter.stats.get("failed", [])
             for k, v in getattr(rep, "user_properties", []) if k == "acceptance"]
    if lines:
        terminalreporter.section("acceptance")
        terminalreporter.write_line("NOTE  published benchmark numbers on captured video: not reproducible at desk scale (see README)")
        for line in lines:
            terminalreporter.write_line(line)
