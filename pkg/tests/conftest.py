import numpy as np
import pytest

DEFAULT_DOAS = (5.345, 25.789, 45.456)

_acceptance_lines = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def report():
    """Collect one pass/fail line per acceptance criterion."""
    return _acceptance_lines.append


def random_hermitian(rng, n):
    X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (X + X.conj().T) / 2


def random_psd(rng, n, rank=None):
    rank = rank or n
    X = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    return X @ X.conj().T


def ula(n):
    return np.arange(n) * 0.5


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
