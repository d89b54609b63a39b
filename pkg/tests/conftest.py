import numpy as np
import pytest

from cejulia.julia import julia_points, occupancy_from_sample
from cejulia.sphere import RationalMap, critical_set


@pytest.fixture(scope="session")
def chebyshev():
    return RationalMap.parse("-2,0,1")


@pytest.fixture(scope="session")
def dendrite():
    return RationalMap.parse("1j,0,1")


@pytest.fixture(scope="session")
def chebyshev_sample(chebyshev):
    return julia_points(chebyshev, count=200_000, seed=1)


@pytest.fixture(scope="session")
def dendrite_sample(dendrite):
    return julia_points(dendrite, count=400_000, seed=1)


@pytest.fixture(scope="session")
def chebyshev_crit(chebyshev, chebyshev_sample):
    return critical_set(chebyshev, chebyshev_sample.points)


@pytest.fixture(scope="session")
def dendrite_crit(dendrite, dendrite_sample):
    return critical_set(dendrite, dendrite_sample.points)


@pytest.fixture(scope="session")
def chebyshev_occ(chebyshev_sample):
    return occupancy_from_sample(chebyshev_sample, 12)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
