"""Pointwise and least-squares reconstruction of the anisotropy ``(xi, zeta)``.

Each data pair ``(X, Y)`` gives two linear equations in ``(xi, zeta)``:

    [[x1, x2], [y2, -y1]] @ (xi, zeta) = (y1, x2)

which is solved exactly for one pair and in the normal-equation sense for
several pairs.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .conductivity import AnisotropyXiZeta
from .forward import Illumination
from .frames import DataVectorFields

#: Nodes with ``|X.Y|`` below this fraction of its maximum are masked.
REL_THRESHOLD = 1e-10


@dataclass
class AnisotropyEstimate:
    """Reconstructed ``(xi, zeta)`` with NaN at masked nodes."""

    xi: np.ndarray
    zeta: np.ndarray
    mask: np.ndarray

    @property
    def masked_count(self) -> int:
        return int(self.mask.sum())

    def filled(self) -> AnisotropyXiZeta:
        """Anisotropy usable downstream, isotropic at masked nodes."""
        return AnisotropyXiZeta(np.where(self.mask, 1.0, self.xi), np.where(self.mask, 0.0, self.zeta))


def _finish(xi, zeta, bad) -> AnisotropyEstimate:
    mask = bad | ~np.isfinite(xi) | ~np.isfinite(zeta) | ~(xi > 0)
    return AnisotropyEstimate(np.where(mask, np.nan, xi), np.where(mask, np.nan, zeta), mask)


def reconstruct_pointwise(D: DataVectorFields, rel_threshold: float = REL_THRESHOLD) -> AnisotropyEstimate:
    """Solve ``Atilde2(xi, zeta) X = Y`` node by node."""
    (x1, x2), (y1, y2) = D.X, D.Y
    xy = x1 * y1 + x2 * y2
    bad = np.abs(xy) <= rel_threshold * np.abs(xy).max()
    if D.floored is not None:
        bad = bad | D.floored
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = (y1**2 + x2**2) / xy
        zeta = (y1 * y2 - x1 * x2) / xy
    return _finish(xi, zeta, bad)


def normal_system(Ds: Sequence[DataVectorFields]) -> tuple[np.ndarray, np.ndarray]:
    """Accumulate the per-node normal matrix and right-hand side.

    Returns ``Xi`` with shape ``(2, 2, n+1, n+1)`` and ``b = sum X.Y``.
    Terms are summed in list order.
    """
    shape = Ds[0].X.shape[1:]
    Xi = np.zeros((2, 2) + shape)
    b = np.zeros(shape)
    for D in Ds:
        (x1, x2), (y1, y2) = D.X, D.Y
        Xi[0, 0] += x1**2 + y2**2
        Xi[1, 0] += x1 * x2 - y1 * y2
        Xi[1, 1] += x2**2 + y1**2
        b += x1 * y1 + x2 * y2
    Xi[0, 1] = Xi[1, 0]
    return Xi, b


def reconstruct_least_squares(
    Ds: Sequence[DataVectorFields], rel_threshold: float = REL_THRESHOLD
) -> AnisotropyEstimate:
    """Least-squares ``(xi, zeta)`` over several illumination sets.

    A single set gives a square system, which is solved directly by
    :func:`reconstruct_pointwise`; its normal equations have the same
    solution.
    """
    Ds = list(Ds)
    if not Ds:
        raise ValueError("need at least one data pair")
    if len(Ds) == 1:
        return reconstruct_pointwise(Ds[0], rel_threshold)
    Xi, b = normal_system(Ds)
    det = Xi[0, 0] * Xi[1, 1] - Xi[1, 0] ** 2
    root = np.sqrt(np.maximum(det, 0.0))
    bad = root <= rel_threshold * root.max()
    for D in Ds:
        if D.floored is not None:
            bad = bad | D.floored
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = b / det
        xi = scale * Xi[1, 1]
        zeta = -scale * Xi[1, 0]
    return _finish(xi, zeta, bad)


def _unit(angle: float) -> tuple[float, float]:
    return np.cos(angle), np.sin(angle)


def rotated_illumination_family(
    p: int, exponents: tuple[float, float, float] = (1.0, 2.0, 1.0)
) -> list[list[Illumination]]:
    """``p`` rotated illumination triplets ``(g1_j, g2_j, g3_j)``, j = 1..p.

    With ``beta = 2 pi j / p``, ``b(t) = (cos t, sin t)`` and the default
    base exponents ``(1, 2, 1)``:

    * ``g1 = (3 + x.b(beta))^(1 + j/p)``
    * ``g2 = x.b(beta + pi/4) + 0.01 (2 + x.b(beta + pi/4))^(2 + j/p)``
    * ``g3 = (3 + x.b(beta + pi/2))^(1 + j/p)``
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    k1, k2, k3 = exponents
    family = []
    for j in range(1, p + 1):
        beta = 2 * np.pi * j / p
        e = j / p
        c1, s1 = _unit(beta)
        c2, s2 = _unit(beta + np.pi / 4)
        c3, s3 = _unit(beta + np.pi / 2)
        family.append([
            Illumination(lambda x, y, c=c1, s=s1, k=k1 + e: (3 + c * x + s * y) ** k, f"g1[{j}/{p}]"),
            Illumination(
                lambda x, y, c=c2, s=s2, k=k2 + e: c * x + s * y + 0.01 * (2 + c * x + s * y) ** k,
                f"g2[{j}/{p}]",
            ),
            Illumination(lambda x, y, c=c3, s=s3, k=k3 + e: (3 + c * x + s * y) ** k, f"g3[{j}/{p}]"),
        ])
    return family
