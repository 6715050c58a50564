from __future__ import annotations

import numpy as np
import pytest

from kcbs_device.quantum import DensityState
from kcbs_device.scenario import build_kcbs_scenario


@pytest.fixture(scope="session")
def kcbs():
    return build_kcbs_scenario()


def random_full_rank_state(rng: np.random.Generator, dim: int = 3) -> DensityState:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = g @ g.conj().T + 1e-3 * np.eye(dim)
    return DensityState(m / np.trace(m).real)


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, ok: bool, detail: str, seconds: float) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}  [{seconds * 1e3:.2f} ms]"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
