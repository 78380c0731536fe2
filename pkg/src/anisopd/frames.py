"""Gram-Schmidt frames built from power densities, and the data fields X, Y.

For a pair of solutions ``(a, b)`` with power densities ``Haa, Hab, Hbb`` the
Gram-Schmidt transfer matrix is lower triangular,

    T = [[Haa^-1/2, 0], [-Hab Haa^-1/2 / d, Haa^1/2 / d]],
    d = (Haa Hbb - Hab^2)^1/2,

so that ``T^T T = H^-1``. The vector fields ``V_ij = grad(t_ik) t^kj`` then have
closed forms (``V_12`` vanishes identically).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .forward import PowerDensitySet
from .grid import Grid, gradient

#: Floor applied to ``d``, ``Haa`` and ``Hbb`` before division.
EPS = 1e-14


class AdmissibilityError(ValueError):
    """Raised when data violate the positivity condition at some nodes."""

    def __init__(self, message: str, nodes: np.ndarray):
        super().__init__(message)
        self.nodes = nodes


def J(v: np.ndarray) -> np.ndarray:
    """Rotation by +pi/2 of a vector field."""
    return np.stack([-v[1], v[0]])


def dot(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return u[0] * v[0] + u[1] * v[1]


def matvec(M: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.einsum("abxy,bxy->axy", M, v)


@dataclass
class FrameData:
    """Gram-Schmidt data of one pair of solutions.

    Attributes
    ----------
    idx : (int, int)
        Zero-based solution indices of the pair.
    H11, H12, H22 : ndarray
        Power densities of the pair (floored where needed).
    d : ndarray
        ``sqrt(H11 H22 - H12^2)``.
    t : ndarray, shape (2, 2, n+1, n+1)
        Transfer matrix entries.
    V : ndarray, shape (2, 2, 2, n+1, n+1)
        ``V[i, j]`` is the vector field ``V_ij``; filled by :func:`v_fields`.
    floored : ndarray of bool
        Nodes where a floor was applied.
    """

    grid: Grid
    idx: tuple[int, int]
    H11: np.ndarray
    H12: np.ndarray
    H22: np.ndarray
    d: np.ndarray
    t: np.ndarray
    floored: np.ndarray
    V: np.ndarray | None = None

    @property
    def t_inv(self) -> np.ndarray:
        a, b, c = self.t[0, 0], self.t[1, 0], self.t[1, 1]
        z = np.zeros_like(a)
        return np.array([[1 / a, z], [-b / (a * c), 1 / c]])

    @property
    def N(self) -> np.ndarray:
        """``(1/2) grad log |H| = grad log d``."""
        return gradient(self.grid, np.log(self.d))

    @property
    def V12a(self) -> np.ndarray:
        if self.V is None:
            raise ValueError("V fields not computed; call v_fields first")
        return 0.5 * (self.V[0, 1] - self.V[1, 0])

    @property
    def H_inv(self) -> np.ndarray:
        d2 = self.d**2
        return np.array([[self.H22 / d2, -self.H12 / d2], [-self.H12 / d2, self.H11 / d2]])


def pair_frame(H: PowerDensitySet, a: int, b: int, strict: bool = True) -> FrameData:
    grid = H.grid
    H11, H12, H22 = H[a, a].copy(), H[a, b].copy(), H[b, b].copy()
    d2 = H11 * H22 - H12**2
    bad = ~(d2 > 0) | ~(H11 > 0) | ~(H22 > 0)
    if strict and bad.any():
        nodes = np.argwhere(bad)
        raise AdmissibilityError(
            f"positivity fails for pair ({a + 1},{b + 1}) at {len(nodes)} nodes", nodes
        )
    floored = bad | (d2 < EPS**2) | (H11 < EPS) | (H22 < EPS)
    H11 = np.maximum(H11, EPS)
    H22 = np.maximum(H22, EPS)
    d = np.sqrt(np.maximum(d2, EPS**2))
    r = np.sqrt(H11)
    z = np.zeros_like(H11)
    t = np.array([[1 / r, z], [-H12 / (r * d), r / d]])
    return FrameData(grid, (a, b), H11, H12, H22, d, t, floored)


def gram_schmidt_transfer(
    H: PowerDensitySet,
    pairs: Sequence[tuple[int, int]] = ((0, 1), (1, 2)),
    strict: bool = True,
) -> tuple[FrameData, ...]:
    """Transfer matrices for each pair of solutions.

    With the default ``pairs`` the two frames are built from solutions
    (1, 2) and (2, 3) of a three-solution set.
    """
    return tuple(v_fields(pair_frame(H, a, b, strict)) for a, b in pairs)


def v_fields(F: FrameData) -> FrameData:
    """Fill ``F.V`` with the closed-form Gram-Schmidt vector fields."""
    g = F.grid
    grad = lambda f: gradient(g, f)
    V = np.zeros((2, 2, 2) + g.shape)
    V[0, 0] = -0.5 * grad(np.log(F.H11))
    V[1, 0] = -(F.H11 / F.d) * grad(F.H12 / F.H11)
    V[1, 1] = grad(0.5 * np.log(F.H11) - np.log(F.d))
    F.V = V
    return F


def v_fields_from_definition(F: FrameData) -> np.ndarray:
    """``V_ij = grad(t_ik) t^kj`` evaluated term by term."""
    gt = np.array([[gradient(F.grid, F.t[i, k]) for k in range(2)] for i in range(2)])
    ti = F.t_inv
    return np.einsum("ikaxy,kjxy->ijaxy", gt, ti)


@dataclass
class DataVectorFields:
    """The pair ``(X, Y)`` with ``Atilde^2 X = Y`` on exact data."""

    X: np.ndarray
    Y: np.ndarray
    floored: np.ndarray = field(default=None)

    @property
    def inner(self) -> np.ndarray:
        return dot(self.X, self.Y)


def xy_fields(F1: FrameData, F2: FrameData, H: PowerDensitySet | None = None) -> DataVectorFields:
    """Data fields ``X, Y`` from two frames.

    When the frames share a solution (pairs (1, 2) and (2, 3)) the explicit
    Gram-Schmidt expressions are used. Otherwise the angle difference is
    recovered from cross power densities, which requires ``H``.
    """
    g = F1.grid
    floored = F1.floored | F2.floored
    Y = -0.5 * J(gradient(g, np.log(F2.d) - np.log(F1.d)))
    if F1.idx[1] == F2.idx[0]:
        Hm = F1.H22
        X = -0.5 * Hm * (gradient(g, F1.H12 / Hm) / F1.d + gradient(g, F2.H12 / Hm) / F2.d)
        return DataVectorFields(X, Y, floored)
    if H is None:
        raise ValueError("frames without a shared solution need the full power-density set")
    return DataVectorFields(_x_general(F1, F2, H), Y, floored)


def xy_fields_general(F1: FrameData, F2: FrameData, H: PowerDensitySet) -> DataVectorFields:
    """Same as :func:`xy_fields` but always through the angle-difference route."""
    Y = -0.5 * J(gradient(F1.grid, np.log(F2.d) - np.log(F1.d)))
    return DataVectorFields(_x_general(F1, F2, H), Y, F1.floored | F2.floored)


def _x_general(F1: FrameData, F2: FrameData, H: PowerDensitySet) -> np.ndarray:
    g = F1.grid
    cross = np.array([[H[p, q] for q in F2.idx] for p in F1.idx])
    cos = np.einsum("ixy,jxy,ijxy->xy", F1.t[0], F2.t[0], cross)
    sin = np.einsum("ixy,jxy,ijxy->xy", F1.t[1], F2.t[0], cross)
    dtheta = cos * gradient(g, sin) - sin * gradient(g, cos)
    return dtheta - F2.V12a + F1.V12a


@dataclass
class AdmissibilityReport:
    min_d1: float
    min_d2: float
    min_norm_y: float
    c0: float
    y0: float
    floored_nodes: int = 0

    @property
    def cond1(self) -> bool:
        return self.min_d1 >= self.c0 and self.min_d2 >= self.c0

    @property
    def cond2(self) -> bool:
        return self.min_norm_y >= self.y0

    @property
    def ok(self) -> bool:
        return self.cond1 and self.cond2

    def as_dict(self) -> dict:
        return {
            "min_d1": self.min_d1, "min_d2": self.min_d2, "min_norm_y": self.min_norm_y,
            "c0": self.c0, "y0": self.y0, "floored_nodes": self.floored_nodes,
            "cond1": self.cond1, "cond2": self.cond2,
        }


def admissibility(
    F1: FrameData, F2: FrameData, D: DataVectorFields, c0: float = 1e-6, y0: float = 1e-8
) -> AdmissibilityReport:
    """Report-only check of the positivity and non-vanishing conditions."""
    norm_y = np.hypot(D.Y[0], D.Y[1])
    floored = F1.floored | F2.floored
    return AdmissibilityReport(
        min_d1=float(F1.d.min()), min_d2=float(F2.d.min()), min_norm_y=float(norm_y.min()),
        c0=c0, y0=y0, floored_nodes=int(floored.sum()),
    )
