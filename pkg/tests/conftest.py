import numpy as np
import pytest

from maxcon.consensus import PenaltyParams, ProblemInstance
from maxcon.graph import random_connected_graph
from maxcon.harness import initial_values


@pytest.fixture(scope="session")
def random20():
    return random_connected_graph(20, 4.0, seed=7)


@pytest.fixture(scope="session")
def inst20():
    return ProblemInstance(initial_values(0, 20))


@pytest.fixture
def unit_rho():
    return PenaltyParams(1.0, 1.0)


def floyd_warshall(adjacency):
    """All-pairs hop counts, independent of the BFS used by the package."""
    A = np.asarray(adjacency, dtype=float)
    D = np.where(A > 0, 1.0, np.inf)
    np.fill_diagonal(D, 0.0)
    for k in range(A.shape[0]):
        D = np.minimum(D, D[:, [k]] + D[[k], :])
    return D


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def record(request):
    """Log one acceptance criterion outcome for the end-of-run summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def _record(number, name, ok, detail):
        lines.append((number, name, bool(ok), detail))
        print(f"[{'PASS' if ok else 'FAIL'}] #{number} {name}: {detail}")

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, detail in sorted(lines, key=lambda t: t[0]):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  #{number:<2d} {name}: {detail}")
