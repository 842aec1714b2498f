import numpy as np
import pytest

from mudalloc.scenario import Scenario, ScenarioConfig, build_scenario


def random_scenario(seed, N=3, K=4, J=2, epsilon=0.0, variant="as_printed", dv=2, spread=2.0):
    """Small synthetic scenario with log-normal gains of order sigma2 = 1."""
    rng = np.random.default_rng(seed)
    h = 10 ** (spread * rng.uniform(-1, 1, (N, K, J)) / 2) * np.exp(2j * np.pi * rng.random((N, K, J)))
    s = np.zeros((N, K), dtype=complex)
    for k in range(K):
        rows = rng.choice(N, size=min(dv, N), replace=False)
        s[rows, k] = rng.choice((-1.0, 1.0), size=len(rows)) / np.sqrt(len(rows))
    return Scenario.from_arrays(h, s, 1.0, epsilon=epsilon, interference_variant=variant)


@pytest.fixture
def small():
    return random_scenario(0)


@pytest.fixture(scope="session")
def default_scenario():
    return build_scenario(ScenarioConfig(rng_seed=3))


ACCEPTANCE_LINES = []


def record_criterion(number, title, passed, detail):
    """Store one acceptance verdict; printed in the terminal summary."""
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {number} {title}: {detail}")
    print(ACCEPTANCE_LINES[-1])
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
