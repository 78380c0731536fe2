"""Determinant reconstruction through the strongly coupled elliptic system.

With the anisotropy known, the two solutions ``(u1, u2)`` solve

    div(|H|^1/2 H^ji Atilde^2 grad u_i) = 0,   u_j = g_j on the boundary,

a system that only involves data. ``|A|^-1`` then has a known gradient.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .conductivity import AnisotropyXiZeta
from .forward import PowerDensitySet
from .frames import EPS, AdmissibilityError, matvec
from .grid import (
    DirichletSolver,
    Grid,
    divergence,
    elliptic_operator,
    gradient,
    solve_poisson_dirichlet,
)


@dataclass
class PairData:
    """``|H|^1/2`` and ``H^-1`` for a pair of solutions, floored where needed."""

    root_det: np.ndarray
    H: np.ndarray
    H_inv: np.ndarray
    floored: np.ndarray


def pair_data(H: PowerDensitySet, strict: bool = True) -> PairData:
    H11, H12, H22 = H[0, 0], H[0, 1], H[1, 1]
    det = H11 * H22 - H12**2
    bad = ~(det > 0)
    if strict and bad.any():
        raise AdmissibilityError(f"positivity fails at {int(bad.sum())} nodes", np.argwhere(bad))
    floored = bad | (det < EPS**2)
    det = np.maximum(det, EPS**2)
    Hm = np.array([[H11, H12], [H12, H22]])
    Hinv = np.array([[H22, -H12], [-H12, H11]]) / det
    return PairData(np.sqrt(det), Hm, Hinv, floored)


@dataclass
class CoupledSystem:
    grid: Grid
    matrix: sp.csr_matrix
    rhs: np.ndarray
    floored: np.ndarray

    def solve(self) -> tuple[np.ndarray, np.ndarray]:
        u = DirichletSolver(self.matrix, self.grid.n).solve(self.rhs)
        N = self.grid.size
        return u[:N].reshape(self.grid.shape), u[N:].reshape(self.grid.shape)


def coupled_blocks(grid: Grid, a: AnisotropyXiZeta, P: PairData) -> list[list[sp.csr_matrix]]:
    """Blocks ``B[j][i] = div(|H|^1/2 H^ji Atilde^2 grad .)`` without boundary rows."""
    A2 = a.matrix()
    return [[elliptic_operator(grid, P.root_det * P.H_inv[j, i] * A2) for i in range(2)]
            for j in range(2)]


def assemble_coupled(
    a: AnisotropyXiZeta,
    H: PowerDensitySet,
    g1: np.ndarray,
    g2: np.ndarray,
    strict: bool = True,
) -> CoupledSystem:
    """Monolithic block system with Dirichlet identity rows for ``(g1, g2)``.

    ``H`` must hold the power densities of the two solutions (first two
    entries are used). ``g1, g2`` are fields whose boundary values are used.
    """
    grid = H.grid
    P = pair_data(H, strict)
    if not all(np.all(np.isfinite(P.root_det * P.H_inv[j, i])) for i in range(2) for j in range(2)):
        raise ValueError("non-finite coupled coefficients")
    blocks = coupled_blocks(grid, a, P)
    bmask = grid.boundary_mask.ravel()
    keep = sp.diags((~bmask).astype(float))
    ident = sp.diags(bmask.astype(float))
    rows = []
    for j in range(2):
        row = []
        for i in range(2):
            B = keep @ blocks[j][i]
            if i == j:
                B = B + ident
            row.append(B)
        rows.append(row)
    M = sp.bmat(rows, format="csr")
    rhs = np.concatenate([np.where(bmask, np.asarray(g, float).ravel(), 0.0) for g in (g1, g2)])
    return CoupledSystem(grid, M, rhs, P.floored)


def solve_coupled(a, H, g1, g2, strict: bool = True) -> tuple[np.ndarray, np.ndarray]:
    return assemble_coupled(a, H, g1, g2, strict).solve()


def advection_fields(a: AnisotropyXiZeta, H: PowerDensitySet, strict: bool = True) -> np.ndarray:
    """``W[i, p] = H_qi |H|^-1/2 grad(|H|^1/2 H^pq)``, shape ``(2, 2, 2, n+1, n+1)``."""
    grid = H.grid
    P = pair_data(H, strict)
    grads = np.array([[gradient(grid, P.root_det * P.H_inv[p, q]) for q in range(2)]
                      for p in range(2)])
    return np.einsum("qixy,pqaxy->ipaxy", P.H, grads) / P.root_det


def nondivergence_residual(a: AnisotropyXiZeta, H: PowerDensitySet, u: np.ndarray) -> np.ndarray:
    """``div(Atilde^2 grad u_i) + W_ip . Atilde^2 grad u_p`` for i = 1, 2."""
    grid = H.grid
    A2 = a.matrix()
    W = advection_fields(a, H)
    flux = np.stack([matvec(A2, gradient(grid, ui)) for ui in u])
    out = np.empty((2,) + grid.shape)
    for i in range(2):
        out[i] = divergence(grid, flux[i])
        for p in range(2):
            out[i] += W[i, p, 0] * flux[p, 0] + W[i, p, 1] * flux[p, 1]
    return out


def inv_detA_rhs(a: AnisotropyXiZeta, H: PowerDensitySet, u1, u2, strict: bool = True) -> np.ndarray:
    """``grad |A|^-1 = -|H|^-1/2 (grad(|H|^1/2 H^pq) . Atilde^2 grad u_p) grad u_q``."""
    grid = H.grid
    P = pair_data(H, strict)
    A2 = a.matrix()
    gu = [gradient(grid, u1), gradient(grid, u2)]
    flux = [matvec(A2, g) for g in gu]
    G = np.zeros((2,) + grid.shape)
    for p in range(2):
        for q in range(2):
            w = gradient(grid, P.root_det * P.H_inv[p, q])
            G += (w[0] * flux[p][0] + w[1] * flux[p][1]) * gu[q]
    return -G / P.root_det


def reconstruct_inv_detA(
    a: AnisotropyXiZeta, H: PowerDensitySet, u1, u2, boundary: np.ndarray, strict: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """Poisson solve for ``v = |A|^-1``; returns ``(v, 1/v)``.

    ``boundary`` carries the Dirichlet values of ``|A|^-1``. Nonpositive
    ``v`` is returned as is; callers flag it.
    """
    G = inv_detA_rhs(a, H, u1, u2, strict)
    v = solve_poisson_dirichlet(H.grid, divergence(H.grid, G), boundary)
    with np.errstate(divide="ignore"):
        return v, 1.0 / v
