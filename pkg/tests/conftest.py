from __future__ import annotations

import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tdoa_cls.geometry import LinearizedSystem, SensorArray, build_system, simulate_measurements  # noqa: E402
from tdoa_cls.spectrum import pd_interval  # noqa: E402

DATA = Path(__file__).resolve().parent.parent / "demos" / "data"


def random_array(rng, n, m, spread=5.0):
    return SensorArray(rng.uniform(-2, 2, n), rng.uniform(-spread, spread, (m, n)))


def random_physical_system(rng, n=None, m=None, sigma=0.05):
    n = n or int(rng.integers(2, 4))
    m = m or int(rng.integers(n + 1, n + 4))
    array = random_array(rng, n, m)
    src = rng.uniform(-6, 6, n)
    meas = simulate_measurements(array, src, sigma, int(rng.integers(0, 2**31)))
    return build_system(array, meas)


def random_abstract_system(rng, n=None, m=None):
    n = n or int(rng.integers(2, 4))
    m = m or int(rng.integers(n + 1, n + 4))
    return LinearizedSystem(rng.normal(size=(m, n + 1)), rng.normal(size=m))


def hard_case_system(rng, side, n=None, m=None):
    """Random system with ``A^T b`` orthogonal to the null direction at one endpoint.

    ``side`` is ``"l"`` or ``"u"``. The constant sign of ``h`` then decides
    whether the solver actually lands on that endpoint.
    """
    base = random_abstract_system(rng, n, m)
    spec = pd_interval(base)
    z = (spec.null_l if side == "l" else spec.null_u)[:, 0]
    az = base.a_matrix @ z
    b = base.b_vector - az * (az @ base.b_vector) / (az @ az)
    return LinearizedSystem(base.a_matrix, b)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def data_dir():
    return DATA


SQRT2, SQRT3, SQRT6 = math.sqrt(2), math.sqrt(3), math.sqrt(6)


ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
