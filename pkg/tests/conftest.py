import numpy as np
import pytest

from klasr import _backend

ACCEPTANCE_LINES = []


@pytest.fixture(params=sorted(_backend.available_backends()))
def backend(request, monkeypatch):
    """Run the test once per kernel backend that is importable."""
    monkeypatch.setattr(_backend, "kernels", _backend.available_backends()[request.param])
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spd(rng, n, cond_floor=0.1):
    a = rng.standard_normal((n, n))
    return a @ a.T + cond_floor * n * np.eye(n)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
