import functools

import numpy as np
import pytest

from anisopd.conductivity import phantom
from anisopd.forward import coordinate_pair, power_densities, solve_illuminations, standard_triplet
from anisopd.grid import Grid


@functools.lru_cache(maxsize=None)
def triplet_data(name: str, n: int):
    """Conductivity, solutions and noiseless power densities for the triplet."""
    c = phantom(name, Grid(n))
    us = solve_illuminations(c, standard_triplet())
    return c, us, power_densities(c, us)


@functools.lru_cache(maxsize=None)
def pair_data(name: str, n: int):
    """Same for the ``(x, y)`` illuminations."""
    c = phantom(name, Grid(n))
    us = solve_illuminations(c, coordinate_pair())
    return c, us, power_densities(c, us)


def subdomain(grid: Grid, half_width: float = 0.9) -> np.ndarray:
    X, Y = grid.meshgrid()
    tol = 1e-12
    return (np.abs(X) <= half_width + tol) & (np.abs(Y) <= half_width + tol)


def observed_order(errors) -> np.ndarray:
    e = np.asarray(errors, dtype=float)
    return np.log2(e[:-1] / e[1:])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# One line per acceptance criterion, printed in the terminal summary.
ACCEPTANCE_LINES: dict[int, str] = {}


def record_acceptance(k: int, ok: bool, detail: str) -> bool:
    ACCEPTANCE_LINES[k] = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(ACCEPTANCE_LINES[k])
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
