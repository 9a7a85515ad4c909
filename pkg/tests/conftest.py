from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

DATA = Path(__file__).parent / "data"
_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def data_dir() -> Path:
    return DATA


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def criterion(request):
    """``criterion(k, ok, detail)`` records a PASS/FAIL line and asserts ``ok``."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def record(k: int, ok: bool, detail: str) -> None:
        lines.append((k, bool(ok), detail))
        assert ok, f"criterion {k}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for k, ok, detail in sorted(lines):
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
