import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from zakharov.spectral import Field2D, GridSpec

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def grid16():
    return GridSpec(16, 2 * np.pi)


@pytest.fixture
def grid32():
    return GridSpec(32, 2 * np.pi)


def random_field(rng, grid, real=False, decay=8.0, band=False):
    """Smooth random field with Gaussian spectral envelope ``exp(-|k|^2 / decay)``."""
    coeffs = (rng.standard_normal((grid.M, grid.M)) + 1j * rng.standard_normal((grid.M, grid.M)))
    coeffs *= np.exp(-grid.k_squared / decay)
    if band:
        coeffs *= grid.dealias_mask
    values = np.fft.ifft2(coeffs, norm="forward")
    if real:
        return Field2D.physical(grid, values.real, real_valued=True)
    return Field2D.physical(grid, values)


def zero_mean(field):
    v = field.physical_data()
    return Field2D.physical(field.grid, v - v.mean(), real_valued=field.real_valued)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
