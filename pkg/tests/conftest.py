import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def blade_product(a: tuple[int, ...], b: tuple[int, ...]) -> tuple[float, tuple[int, ...]]:
    """Product of basis blades given as ascending index tuples, by bubble sort.

    Independent of the bitmask kernel: concatenate, sort with a sign flip per
    adjacent swap, then cancel equal neighbours (e_i e_i = 1).
    """
    seq = list(a) + list(b)
    sign = 1.0
    for i in range(len(seq)):
        for j in range(len(seq) - 1 - i):
            if seq[j] > seq[j + 1]:
                seq[j], seq[j + 1] = seq[j + 1], seq[j]
                sign = -sign
    out = []
    for k in seq:
        if out and out[-1] == k:
            out.pop()
        else:
            out.append(k)
    return sign, tuple(out)


def naive_gp(n: int, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Reference geometric product on bitmask-indexed coefficients."""

    def idx(mask):
        return tuple(i + 1 for i in range(n) if (mask >> i) & 1)

    out = np.zeros(1 << n)
    for I in np.flatnonzero(x):
        for J in np.flatnonzero(y):
            s, K = blade_product(idx(int(I)), idx(int(J)))
            mask = sum(1 << (k - 1) for k in K)
            out[mask] += s * x[I] * y[J]
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def scenario_results():
    """Default runs of the three built-in scenarios, shared across test modules."""
    from noetherlab.scenarios import SCENARIOS, ScenarioConfig, run_scenario

    return {name: run_scenario(ScenarioConfig.create(name), threads=1) for name in SCENARIOS}


ACCEPTANCE: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
