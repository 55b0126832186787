import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from learnware.experiments import ToySettings, build_toy_pool  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def toy_pool(tmp_path_factory):
    """Seed-0 toy pool plus the raw provider data (held only by the harness)."""
    root = tmp_path_factory.mktemp("toy") / "pool"
    pool, datasets = build_toy_pool(root, seed=0, settings=ToySettings())
    return pool, datasets


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record a one-line acceptance verdict; printed in the terminal summary."""

    def _report(criterion: int, ok: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
