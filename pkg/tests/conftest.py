import numpy as np
import pytest

from msa.core import Dataset


def random_domain_data(rng, m, d, p):
    X = rng.normal(size=(m, d))
    k = np.concatenate([np.arange(p), rng.integers(0, p, m - p)])
    return Dataset(X, None, k, p)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
