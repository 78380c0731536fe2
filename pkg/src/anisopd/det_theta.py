"""Determinant reconstruction through the frame angle.

Given the anisotropy and one Gram-Schmidt frame, the angle ``theta`` of the
orthonormalized frame has a known gradient; once ``theta`` is recovered,
``grad log|A|`` is known as well. Both gradients are integrated by taking a
divergence and solving a Dirichlet Poisson problem.
"""
from __future__ import annotations

import numpy as np

from .conductivity import AnisotropySqrt, AnisotropyXiZeta, sqrt_of_anisotropy
from .frames import FrameData, J, matvec
from .grid import Grid, divergence, gradient, solve_poisson_dirichlet


def lie_bracket(grid: Grid, a: AnisotropySqrt) -> np.ndarray:
    """Bracket ``[A2, A1]`` of the columns of ``Atilde(lam, mu)``."""
    lam, mu = a.lam, a.mu
    q = 1 + mu**2
    M1 = np.array([[mu, q / lam], [q / lam, mu * q / lam**2]])
    M2 = np.array([[lam, mu], [mu, (mu**2 - 1) / lam]])
    return matvec(M1, gradient(grid, lam)) - matvec(M2, gradient(grid, mu))


def theta_rhs(a: AnisotropyXiZeta, F: FrameData) -> np.ndarray:
    """``grad theta = V12a - Atilde^-2 (J N / 2 + [A2, A1])``."""
    bracket = lie_bracket(F.grid, sqrt_of_anisotropy(a))
    return F.V12a - matvec(a.inverse_matrix(), 0.5 * J(F.N) + bracket)


def reconstruct_theta(a: AnisotropyXiZeta, F: FrameData, theta_boundary: np.ndarray) -> np.ndarray:
    """Solve ``Lap theta = div G`` with Dirichlet data for the frame angle.

    ``theta`` is treated as single valued (no unwrapping).
    """
    G = theta_rhs(a, F)
    return solve_poisson_dirichlet(F.grid, divergence(F.grid, G), theta_boundary)


def frame_angle(grid: Grid, a: AnisotropyXiZeta, u1: np.ndarray) -> np.ndarray:
    """Angle of ``Atilde grad u1``, the first orthonormal frame vector."""
    v = matvec(sqrt_of_anisotropy(a).matrix(), gradient(grid, u1))
    return np.arctan2(v[1], v[0])


def _flip(w: np.ndarray) -> np.ndarray:
    """Apply ``diag(1, -1)``."""
    return np.stack([w[0], -w[1]])


def log_detA_rhs(theta: np.ndarray, a: AnisotropySqrt, F: FrameData) -> np.ndarray:
    """``grad log|A| = Atilde^-1 (cos 2t Fc + sin 2t J Fc)`` with
    ``Fc = U Atilde (V11 - V22) + J U Atilde (V12 + V21)``, ``U = diag(1, -1)``.
    """
    At, V = a.matrix(), F.V
    Fc = _flip(matvec(At, V[0, 0] - V[1, 1])) + J(_flip(matvec(At, V[0, 1] + V[1, 0])))
    c, s = np.cos(2 * theta), np.sin(2 * theta)
    return matvec(a.inverse_matrix(), c * Fc + s * J(Fc))


def log_detA_rhs_unsimplified(theta: np.ndarray, a: AnisotropySqrt, F: FrameData) -> np.ndarray:
    """``N + sum_pq ((V_pq + V_qp) . Atilde R_p) Atilde^-1 R_q``."""
    At, Ai = a.matrix(), a.inverse_matrix()
    R = np.array([[np.cos(theta), np.sin(theta)], [-np.sin(theta), np.cos(theta)]])
    out = F.N.copy()
    for p in range(2):
        ARp = matvec(At, R[p])
        for q in range(2):
            w = F.V[p, q] + F.V[q, p]
            out += (w[0] * ARp[0] + w[1] * ARp[1]) * matvec(Ai, R[q])
    return out


def reconstruct_log_detA(
    theta: np.ndarray, a: AnisotropySqrt, F: FrameData, boundary: np.ndarray
) -> np.ndarray:
    """Solve for ``log|A|`` with Dirichlet ``boundary`` (values of ``log|A|``)."""
    G = log_detA_rhs(theta, a, F)
    return solve_poisson_dirichlet(F.grid, divergence(F.grid, G), boundary)


def reconstruct_detsqrt(
    a: AnisotropyXiZeta,
    F: FrameData,
    theta_boundary: np.ndarray,
    log_det_boundary: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Both Poisson stages; returns ``(theta, |gamma|^1/2)``."""
    theta = reconstruct_theta(a, F, theta_boundary)
    log_det = reconstruct_log_detA(theta, sqrt_of_anisotropy(a), F, log_det_boundary)
    return theta, np.exp(log_det)


def curl_compatibility(grid: Grid, G: np.ndarray) -> np.ndarray:
    """Discrete ``dx G_y - dy G_x``; small when ``G`` is a gradient."""
    return divergence(grid, -J(G))
