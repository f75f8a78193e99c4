import numpy as np
import pytest

from mpfcacc.model import VehicleParams
from mpfcacc.scenarios import ten_vehicle_platoon

_ACCEPTANCE = []


def record_acceptance(criterion, ok, detail=""):
    _ACCEPTANCE.append((criterion, bool(ok), detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {criterion:>2}: {status}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240406)


@pytest.fixture
def ten_vehicle():
    return ten_vehicle_platoon()


def random_vehicle_chain(rng, m, index=None, dc_range=(0.0, 0.0)):
    """Ego plus ``m`` predecessors with random parameters (ego first)."""
    index = m if index is None else index
    ego = VehicleParams(
        index,
        rng.uniform(0.1, 0.5),
        rng.uniform(0.2, 2.0),
        0.0,
        m,
        rng.uniform(0.5, 8.0),
        rng.uniform(0.5, 12.0),
        rng.uniform(0.2, 4.0),
    )
    preds = [
        VehicleParams(index - j, rng.uniform(0.1, 0.5), rng.uniform(0.2, 2.0), rng.uniform(*dc_range))
        for j in range(1, m + 1)
    ]
    return ego, preds
