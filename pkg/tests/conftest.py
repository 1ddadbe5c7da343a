import numpy as np
import pytest

from gnaf.codes import ciod4_relay_code, rotated_qpsk_codebook, theta4_relay_code

CIOD_ROTATION = 31.7175


@pytest.fixture
def rng():
    return np.random.default_rng(20070101)


@pytest.fixture(scope="session")
def theta4():
    return theta4_relay_code()


@pytest.fixture(scope="session")
def theta4_codebook():
    return rotated_qpsk_codebook(CIOD_ROTATION, 3, 4)


@pytest.fixture(scope="session")
def ciod4():
    return ciod4_relay_code()


@pytest.fixture(scope="session")
def ciod4_codebook():
    return rotated_qpsk_codebook(CIOD_ROTATION, 4, 4)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


_ACCEPTANCE_LINES = []


def record_criterion(line):
    _ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
