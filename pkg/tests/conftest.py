from importlib import resources
from pathlib import Path

import numpy as np
import pytest

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record():
    """Print and remember one pass/fail line per acceptance criterion."""

    def _record(criterion: int, passed: bool, detail: str) -> None:
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)

    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return Path(str(resources.files("qloop").joinpath("fixtures")))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
