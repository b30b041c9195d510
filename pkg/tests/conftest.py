import numpy as np
import pytest
from hypothesis import settings

from nskorteweg import Grid, NoiseSpec, Params, State

settings.register_profile("ci", max_examples=40, deadline=None)
settings.load_profile("ci")

TWO_PI = 2 * np.pi


@pytest.fixture
def grid64():
    return Grid(64)


def make_state(rho, u, alpha=1.0, beta=-1.0, gamma=2.0, m=16, noise="off", **kw):
    params = Params(alpha, beta, gamma, galerkin_order=m, noise=NoiseSpec(family=noise), **kw)
    grid = Grid.for_order(m)
    rho = rho(grid.x) if callable(rho) else np.broadcast_to(rho, grid.x.shape)
    u = u(grid.x) if callable(u) else np.broadcast_to(u, grid.x.shape)
    return State.from_primitive(np.array(rho, dtype=float), np.array(u, dtype=float), params, grid)


ACCEPTANCE = {}


def record_acceptance(number: int, passed: bool, detail: str):
    """Store (and print) one acceptance line; the summary hook lists them in order."""
    line = f"ACCEPTANCE #{number:<2d} {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
