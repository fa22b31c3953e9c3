import numpy as np
import pytest

from rhlearn.signal_model import SignalModel, is_controllable


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_controllable_model(rng, n, q, scale=1.0):
    while True:
        A = scale * rng.normal(size=(n, n)) / np.sqrt(n)
        B = rng.normal(size=(n, q))
        model = SignalModel(A, B)
        if is_controllable(model):
            return model


def random_spd(rng, n, floor=0.1):
    M = rng.normal(size=(n, n))
    return M @ M.T + floor * np.eye(n)


_ACCEPTANCE_LINES = []


def record_acceptance(line):
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
