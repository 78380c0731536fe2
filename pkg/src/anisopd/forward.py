"""Forward problem: illuminations, power densities and synthetic noise."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .conductivity import ConductivityField, assemble_tensor
from .grid import (
    ITERATIVE_RTOL,
    DirichletSolver,
    Grid,
    elliptic_operator,
    gradient,
    impose_dirichlet_rows,
    load_field_csv,
    save_field_csv,
    solve_many,
)


@dataclass(frozen=True)
class Illumination:
    """Dirichlet trace ``g(x, y)`` with a descriptive tag."""

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    tag: str = "custom"

    def trace(self, grid: Grid) -> np.ndarray:
        """Values of ``g`` on every node (only boundary nodes are used)."""
        g = grid.sample(self.func)
        if not np.all(np.isfinite(g[grid.boundary_mask])):
            raise ValueError(f"illumination {self.tag} is not finite on the boundary")
        return g


def affine(a: float, b: float, c: float = 0.0) -> Illumination:
    return Illumination(lambda x, y: a * x + b * y + c, tag=f"affine({a:g},{b:g},{c:g})")


def standard_triplet() -> list[Illumination]:
    """``(x + y, y + 0.1 y^2, -x + y)``, used for anisotropy reconstruction."""
    return [
        Illumination(lambda x, y: x + y, "x+y"),
        Illumination(lambda x, y: y + 0.1 * y**2, "y+0.1y^2"),
        Illumination(lambda x, y: -x + y, "-x+y"),
    ]


def standard_quadruple() -> list[Illumination]:
    """Triplet plus ``-x + 0.1 x^2``, paired as (1, 2) and (3, 4).

    Both pairs are positively oriented, which the angle-difference route
    for ``X`` relies on.
    """
    return standard_triplet() + [Illumination(lambda x, y: -x + 0.1 * x**2, "-x+0.1x^2")]


def coordinate_pair() -> list[Illumination]:
    """``(x, y)``, used for the determinant reconstructions."""
    return [Illumination(lambda x, y: x + 0 * y, "x"), Illumination(lambda x, y: y + 0 * x, "y")]


def solve_illuminations(
    c: ConductivityField, gs: Sequence[Illumination], rtol: float = ITERATIVE_RTOL
) -> np.ndarray:
    """Solve ``-div(gamma grad u_i) = 0``, ``u_i = g_i`` on the boundary.

    Returns an array of shape ``(len(gs), n+1, n+1)``. The operator is
    factorized once and reused for every illumination.
    """
    grid = c.grid
    gamma = assemble_tensor(c)
    solver = DirichletSolver(impose_dirichlet_rows(grid, elliptic_operator(grid, gamma)), grid.n, rtol)
    traces = np.stack([g.trace(grid) for g in gs])
    return solve_many(grid, solver, traces)


@dataclass(frozen=True)
class NoiseSpec:
    """Multiplicative noise ``H * (1 + alpha/100 * smooth(r))``.

    ``r`` is uniform on [-1, 1] and smoothed by a 3x3 mean filter with
    replicate padding.
    """

    alpha: float = 0.0
    seed: int = 0
    padding: str = "nearest"

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("noise level alpha must be nonnegative")


@dataclass
class PowerDensitySet:
    """Symmetric matrix of power-density fields ``H[i, j]``.

    ``H`` has shape ``(m, m, n+1, n+1)``.
    """

    grid: Grid
    H: np.ndarray
    tags: list[str] = field(default_factory=list)
    alpha: float = 0.0
    seed: int | None = None

    @property
    def m(self) -> int:
        return self.H.shape[0]

    def __getitem__(self, ij) -> np.ndarray:
        return self.H[ij]

    def sub(self, idx: Sequence[int]) -> "PowerDensitySet":
        """Restriction to the solutions listed in ``idx``."""
        idx = list(idx)
        tags = [self.tags[k] for k in idx] if self.tags else []
        return replace(self, H=self.H[np.ix_(idx, idx)], tags=tags)

    def save(self, directory) -> None:
        """CSV file per entry ``H_ij`` (i <= j) plus ``meta.json``."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for i in range(self.m):
            for j in range(i, self.m):
                save_field_csv(d / f"H_{i + 1}{j + 1}.csv", self.H[i, j])
        meta = {"n": self.grid.n, "m": self.m, "tags": self.tags,
                "alpha": self.alpha, "seed": self.seed}
        (d / "meta.json").write_text(json.dumps(meta, indent=2))

    @classmethod
    def load(cls, directory) -> "PowerDensitySet":
        d = Path(directory)
        meta = json.loads((d / "meta.json").read_text())
        grid = Grid(meta["n"])
        m = meta["m"]
        H = np.empty((m, m) + grid.shape)
        for i in range(m):
            for j in range(i, m):
                H[i, j] = H[j, i] = grid.check(load_field_csv(d / f"H_{i + 1}{j + 1}.csv"))
        return cls(grid, H, list(meta["tags"]), meta["alpha"], meta["seed"])


def power_densities(c: ConductivityField, us: np.ndarray, tags: Sequence[str] = ()) -> PowerDensitySet:
    """``H_ij = gamma grad u_i . grad u_j`` with the grid derivative operators.

    Both orderings ``(gamma grad u_i) . grad u_j`` and ``(gamma grad u_j) .
    grad u_i`` are averaged, so the result is exactly symmetric.
    """
    grid = c.grid
    us = np.asarray(us, dtype=float)
    for u in us:
        grid.check(u)
    gamma = assemble_tensor(c)
    grads = np.stack([gradient(grid, u) for u in us])
    flux = np.einsum("abxy,ibxy->iaxy", gamma, grads)
    m = len(us)
    raw = np.einsum("iaxy,jaxy->ijxy", flux, grads)
    H = 0.5 * (raw + raw.transpose(1, 0, 2, 3))
    return PowerDensitySet(grid, H, list(tags))


def noise_field(grid: Grid, spec: NoiseSpec, key: Sequence[int]) -> np.ndarray:
    """Smoothed uniform noise for the stream ``(spec.seed, *key)``."""
    ss = np.random.SeedSequence(entropy=spec.seed, spawn_key=tuple(int(k) for k in key))
    r = np.random.default_rng(ss).uniform(-1.0, 1.0, size=grid.shape)
    return ndimage.uniform_filter(r, size=3, mode=spec.padding)


def add_noise(H: PowerDensitySet, spec: NoiseSpec, stream: Sequence[int] = ()) -> PowerDensitySet:
    """Perturb every entry ``H_ij`` (i <= j) with its own noise stream.

    The lower triangle mirrors the upper one. ``stream`` prefixes the
    per-entry key so that several sets can share a seed.
    """
    if spec.alpha == 0:
        return replace(H, H=H.H.copy(), alpha=0.0, seed=spec.seed)
    out = H.H.copy()
    for i in range(H.m):
        for j in range(i, H.m):
            r = noise_field(H.grid, spec, (*stream, i, j))
            out[i, j] = H.H[i, j] * (1.0 + spec.alpha / 100.0 * r)
            out[j, i] = out[i, j]
    return replace(H, H=out, alpha=spec.alpha, seed=spec.seed)
