import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hrec.config import TrainConfig  # noqa: E402
from hrec.dataset import SyntheticConfig, generate_synthetic  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_ds():
    return generate_synthetic(SyntheticConfig(num_videos=6, t_n_range=(6, 9), t_g=6, fd=5, wd=3, seed=3))


@pytest.fixture(scope="session")
def tiny_cfg():
    return TrainConfig(sfd=8, vd=6, d_h=5, epochs=2, n_s=3, lr=1e-2)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one acceptance line; the full list is printed after the run."""

    def _report(number: int, ok: bool, detail: str) -> bool:
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
        print(ACCEPTANCE_LINES[-1])
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
