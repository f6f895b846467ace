import numpy as np
import pytest

from clustered_consensus import twocluster
from clustered_consensus.graph import ClusteredNetwork

ACCEPTANCE_LINES: list[str] = []


def random_laplacian(rng: np.random.Generator, n: int, density: float = 0.4) -> np.ndarray:
    """Laplacian of a random weighted digraph (weights in (0, 2], no self loops)."""
    adj = rng.uniform(0.05, 2.0, (n, n)) * (rng.random((n, n)) < density)
    np.fill_diagonal(adj, 0.0)
    return np.diag(adj.sum(axis=1)) - adj


def random_stochastic(rng: np.random.Generator, n: int) -> np.ndarray:
    m = rng.random((n, n)) + 1e-3
    return m / m.sum(axis=1, keepdims=True)


@pytest.fixture
def net4() -> ClusteredNetwork:
    return twocluster.network()


@pytest.fixture
def leaders_only() -> ClusteredNetwork:
    return twocluster.network(leaders_only=True)


@pytest.fixture
def acceptance_log():
    def record(criterion: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
