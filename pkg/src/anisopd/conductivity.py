"""Conductivity parameterizations and analytic phantoms.

The tensor is written ``gamma = detsqrt * Atilde2(xi, zeta)`` with

    Atilde2(xi, zeta) = [[xi, zeta], [zeta, (1 + zeta**2) / xi]],   xi > 0,

a unit-determinant SPD matrix, and ``detsqrt = sqrt(det gamma)``.  Its square
root is parameterized the same way, ``Atilde(lam, mu)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import EllipticityError, Grid, check_ellipticity, load_field_csv


@dataclass(frozen=True)
class AnisotropyXiZeta:
    xi: np.ndarray
    zeta: np.ndarray

    def __post_init__(self):
        if np.any(~(np.asarray(self.xi) > 0)):
            raise ValueError("xi must be positive everywhere")

    def matrix(self) -> np.ndarray:
        return unit_spd(self.xi, self.zeta)

    def inverse_matrix(self) -> np.ndarray:
        """``Atilde^{-2}``; the adjugate since the determinant is one."""
        xi, zeta = np.asarray(self.xi), np.asarray(self.zeta)
        return np.array([[(1 + zeta**2) / xi, -zeta], [-zeta, xi]])


@dataclass(frozen=True)
class AnisotropySqrt:
    lam: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        if np.any(~(np.asarray(self.lam) > 0)):
            raise ValueError("lambda must be positive everywhere")

    def matrix(self) -> np.ndarray:
        return unit_spd(self.lam, self.mu)

    def inverse_matrix(self) -> np.ndarray:
        lam, mu = np.asarray(self.lam), np.asarray(self.mu)
        return np.array([[(1 + mu**2) / lam, -mu], [-mu, lam]])


@dataclass(frozen=True)
class ConductivityField:
    """``gamma = detsqrt * Atilde2(xi, zeta)`` sampled on a grid.

    ``kappa`` is the declared ellipticity constant, checked by
    :func:`assemble_tensor`.
    """

    grid: Grid
    detsqrt: np.ndarray
    aniso: AnisotropyXiZeta
    kappa: float = 8.0
    name: str = "custom"

    def __post_init__(self):
        self.grid.check(self.detsqrt)
        self.grid.check(self.aniso.xi)
        self.grid.check(self.aniso.zeta)
        if np.any(~(self.detsqrt > 0)):
            raise ValueError("detsqrt must be positive everywhere")

    @property
    def xi(self) -> np.ndarray:
        return self.aniso.xi

    @property
    def zeta(self) -> np.ndarray:
        return self.aniso.zeta

    def tensor(self) -> np.ndarray:
        return assemble_tensor(self)

    def sqrt_aniso(self) -> AnisotropySqrt:
        return sqrt_of_anisotropy(self.aniso)


def unit_spd(a, b) -> np.ndarray:
    """``[[a, b], [b, (1 + b**2) / a]]`` stacked along the leading axes."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return np.array([[a, b], [b, (1 + b**2) / a]])


def assemble_tensor(c: ConductivityField) -> np.ndarray:
    """Per-node conductivity matrix ``detsqrt * Atilde2(xi, zeta)``."""
    gamma = c.detsqrt * c.aniso.matrix()
    check_ellipticity(gamma, c.kappa)
    return gamma


def sqrt_of_anisotropy(a: AnisotropyXiZeta) -> AnisotropySqrt:
    """Positive square root of ``Atilde2(xi, zeta)`` as ``Atilde(lam, mu)``."""
    xi, zeta = np.asarray(a.xi, dtype=float), np.asarray(a.zeta, dtype=float)
    s = np.sqrt(xi / (zeta**2 + (1 + xi) ** 2))
    return AnisotropySqrt(lam=(1 + xi) * s, mu=zeta * s)


def bump(X, Y, cx: float, cy: float, radius: float) -> np.ndarray:
    """C-infinity bump ``exp(1 - 1/(1 - r^2/R^2))`` with peak 1, zero for r >= R."""
    s = ((X - cx) ** 2 + (Y - cy) ** 2) / radius**2
    inside = s < 1.0
    out = np.zeros(np.broadcast(X, Y).shape)
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside]))
    return out


def disk(X, Y, cx: float, cy: float, radius: float) -> np.ndarray:
    return ((X - cx) ** 2 + (Y - cy) ** 2 < radius**2).astype(float)


# Anisotropy shared by both phantoms; every bump stays clear of the corners.
def _xi(X, Y):
    return np.exp(0.69 * bump(X, Y, 0.3, 0.3, 0.75) - 0.69 * bump(X, Y, -0.3, -0.3, 0.75))


def _zeta(X, Y):
    return 0.5 * bump(X, Y, 0.3, -0.3, 0.75) - 0.5 * bump(X, Y, -0.3, 0.3, 0.75)


def _detsqrt_smooth(X, Y):
    return 1.0 + 0.6 * bump(X, Y, 0.1, -0.2, 0.85) - 0.3 * bump(X, Y, -0.5, 0.5, 0.45)


def _detsqrt_rough(X, Y):
    inside = np.maximum(disk(X, Y, -0.3, -0.3, 0.35), disk(X, Y, 0.4, 0.35, 0.3))
    return 1.0 + inside


PHANTOMS = {
    "smooth": _detsqrt_smooth,
    "rough": _detsqrt_rough,
}


def phantom(name: str, grid: Grid, kappa: float = 8.0) -> ConductivityField:
    """Analytic test conductivity.

    Both variants share one smooth anisotropy with ``xi`` in [1/2, 2] and
    ``zeta`` in [-1/2, 1/2]. ``"smooth"`` uses C-infinity bumps for ``detsqrt``;
    ``"rough"`` uses two disks where ``detsqrt`` jumps from 1 to 2.
    """
    try:
        det_fn = PHANTOMS[name]
    except KeyError:
        raise ValueError(f"unknown phantom {name!r}; choose from {sorted(PHANTOMS)}") from None
    aniso = AnisotropyXiZeta(grid.sample(_xi), grid.sample(_zeta))
    c = ConductivityField(grid, grid.sample(det_fn), aniso, kappa=kappa, name=name)
    assemble_tensor(c)
    return c


def constant_conductivity(grid: Grid, detsqrt=1.0, xi=1.0, zeta=0.0, kappa: float = 8.0):
    full = lambda v: np.full(grid.shape, float(v))
    return ConductivityField(
        grid, full(detsqrt), AnisotropyXiZeta(full(xi), full(zeta)), kappa=kappa, name="constant"
    )


def load_conductivity_csv(grid: Grid, detsqrt_path, xi_path, zeta_path, kappa: float = 8.0):
    """Custom conductivity from three field CSVs (``detsqrt``, ``xi``, ``zeta``)."""
    fields = [load_field_csv(Path(p)) for p in (detsqrt_path, xi_path, zeta_path)]
    for f in fields:
        grid.check(f)
    c = ConductivityField(grid, fields[0], AnisotropyXiZeta(fields[1], fields[2]),
                          kappa=kappa, name="csv")
    assemble_tensor(c)
    return c


__all__ = [
    "AnisotropySqrt",
    "AnisotropyXiZeta",
    "ConductivityField",
    "EllipticityError",
    "assemble_tensor",
    "constant_conductivity",
    "load_conductivity_csv",
    "phantom",
    "sqrt_of_anisotropy",
    "unit_spd",
]
