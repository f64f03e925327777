import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from geomlab.context import SurfaceContext
from geomlab.surface import gen_ellipsoid, gen_icosphere, perturbed_sphere

settings.register_profile("geomlab", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("geomlab")


@pytest.fixture(scope="session")
def sphere3():
    return gen_icosphere(3)


@pytest.fixture(scope="session")
def sphere4():
    return gen_icosphere(4)


@pytest.fixture(scope="session")
def ellipsoid4():
    return gen_ellipsoid((1.0, 1.0, 1.3), 4)


@pytest.fixture(scope="session")
def bumpy4():
    return perturbed_sphere(0.05, 4, 7, 4)


@pytest.fixture(scope="session")
def ctx4(sphere4):
    return SurfaceContext(sphere4)


@pytest.fixture(scope="session")
def ctx3(sphere3):
    return SurfaceContext(sphere3)


@pytest.fixture(scope="session")
def ellipsoid_ctx(ellipsoid4):
    return SurfaceContext(ellipsoid4)


@pytest.fixture(scope="session")
def bumpy_ctx(bumpy4):
    return SurfaceContext(bumpy4)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_CRITERIA = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_CRITERIA] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line; the line is printed and repeated in the summary."""

    def record(number, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
        request.config.stash[_CRITERIA][number] = line
        print(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_CRITERIA, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines, key=lambda k: (int(str(k).split()[0]), str(k))):
            terminalreporter.write_line(lines[number])
