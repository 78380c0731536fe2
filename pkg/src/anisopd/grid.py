"""Uniform square grid on [-1, 1]^2, finite-difference operators and solvers.

Fields are plain numpy arrays. A scalar field has shape ``(n+1, n+1)`` with
axis 0 running along x and axis 1 along y, so that the flattened (C order)
vector uses the lexicographic node ordering with y fastest. This is the
layout for which ``Dx = kron(D, I)`` and ``Dy = kron(I, D)``.

Vector fields have shape ``(2, n+1, n+1)`` and per-node 2x2 matrix fields
have shape ``(2, 2, n+1, n+1)``.
"""
from __future__ import annotations

import functools
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

logger = logging.getLogger(__name__)

#: Largest subdivision count solved with a sparse direct factorization.
DIRECT_SOLVE_MAX_N = 256
#: Relative residual tolerance of the iterative fallback.
ITERATIVE_RTOL = 1e-10


class SolverError(RuntimeError):
    """Raised when a linear solve fails or does not converge."""


class EllipticityError(ValueError):
    """Raised when a coefficient field is not uniformly elliptic."""


@dataclass(frozen=True)
class Grid:
    """Uniform grid of ``(n+1)**2`` nodes on the square [-1, 1]^2.

    Parameters
    ----------
    n : int
        Number of subdivisions per axis. Must be at least 4.
    """

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 4:
            raise ValueError(f"grid needs an integer n >= 4, got {self.n!r}")

    @property
    def h(self) -> float:
        return 2.0 / self.n

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n + 1, self.n + 1)

    @property
    def size(self) -> int:
        return (self.n + 1) ** 2

    @property
    def coords(self) -> np.ndarray:
        """1D node coordinates ``-1 + i*h``."""
        return -1.0 + self.h * np.arange(self.n + 1)

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        x = self.coords
        return np.meshgrid(x, x, indexing="ij")

    def sample(self, func) -> np.ndarray:
        """Evaluate ``func(x, y)`` at every node."""
        X, Y = self.meshgrid()
        out = np.asarray(func(X, Y), dtype=float)
        return np.broadcast_to(out, self.shape).copy()

    @property
    def boundary_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = True
        return m

    @property
    def interior_mask(self) -> np.ndarray:
        return ~self.boundary_mask

    def check(self, field: np.ndarray, kind: str = "scalar") -> np.ndarray:
        """Validate that ``field`` lives on this grid and return it as float."""
        field = np.asarray(field, dtype=float)
        lead = {"scalar": (), "vector": (2,), "matrix": (2, 2)}[kind]
        if field.shape != lead + self.shape:
            raise ValueError(
                f"{kind} field of shape {field.shape} does not match grid n={self.n}"
            )
        return field


def derivative_matrix_1d(n: int, h: float) -> sp.csr_matrix:
    """Second-order 1D first-derivative matrix with one-sided end stencils."""
    m = n + 1
    D = sp.lil_matrix((m, m))
    for i in range(1, m - 1):
        D[i, i - 1] = -1.0
        D[i, i + 1] = 1.0
    D[0, 0:3] = [-3.0, 4.0, -1.0]
    D[m - 1, m - 3 : m] = [1.0, -4.0, 3.0]
    return (D / (2.0 * h)).tocsr()


@functools.lru_cache(maxsize=8)
def build_derivative_ops(grid: Grid) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Return the sparse operators ``(Dx, Dy)`` acting on flattened fields."""
    D = derivative_matrix_1d(grid.n, grid.h)
    eye = sp.identity(grid.n + 1, format="csr")
    Dx = sp.kron(D, eye, format="csr")
    Dy = sp.kron(eye, D, format="csr")
    return Dx, Dy


def gradient(grid: Grid, f: np.ndarray) -> np.ndarray:
    f = grid.check(f)
    Dx, Dy = build_derivative_ops(grid)
    flat = f.ravel()
    return np.stack([(Dx @ flat).reshape(grid.shape), (Dy @ flat).reshape(grid.shape)])


def divergence(grid: Grid, v: np.ndarray) -> np.ndarray:
    v = grid.check(v, "vector")
    Dx, Dy = build_derivative_ops(grid)
    out = Dx @ v[0].ravel() + Dy @ v[1].ravel()
    return out.reshape(grid.shape)


@functools.lru_cache(maxsize=8)
def laplacian_5pt(grid: Grid) -> sp.csr_matrix:
    """Standard 5-point Laplacian on all nodes (boundary rows are meaningless)."""
    m = grid.n + 1
    L1 = sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(m, m)) / grid.h**2
    eye = sp.identity(m)
    return (sp.kron(L1, eye) + sp.kron(eye, L1)).tocsr()


def impose_dirichlet_rows(grid: Grid, A: sp.spmatrix) -> sp.csr_matrix:
    """Replace boundary rows of ``A`` by identity rows."""
    bmask = grid.boundary_mask.ravel()
    keep = sp.diags((~bmask).astype(float))
    ident = sp.diags(bmask.astype(float))
    return (keep @ A + ident).tocsr()


def elliptic_operator(grid: Grid, coeff: np.ndarray) -> sp.csr_matrix:
    """Assemble ``div(coeff grad u)`` as compositions of ``Dx``, ``Dy``.

    No Dirichlet rows are imposed here.
    """
    coeff = grid.check(coeff, "matrix")
    Dx, Dy = build_derivative_ops(grid)
    D = (Dx, Dy)
    A = None
    for a in range(2):
        for b in range(2):
            term = D[a] @ sp.diags(coeff[a, b].ravel()) @ D[b]
            A = term if A is None else A + term
    return A.tocsr()


def check_ellipticity(coeff: np.ndarray, kappa: float | None = None) -> tuple[float, float]:
    """Return (min, max) eigenvalue of a symmetric matrix field.

    Raises :class:`EllipticityError` when the field is not positive definite or
    when eigenvalues leave ``[1/kappa, kappa]``.
    """
    a, b, c = coeff[0, 0], 0.5 * (coeff[0, 1] + coeff[1, 0]), coeff[1, 1]
    mean = 0.5 * (a + c)
    rad = np.sqrt(0.25 * (a - c) ** 2 + b**2)
    lo, hi = float(np.min(mean - rad)), float(np.max(mean + rad))
    if not (np.all(np.isfinite(coeff)) and lo > 0):
        raise EllipticityError(f"coefficient not positive definite (min eigenvalue {lo:g})")
    if kappa is not None and (lo < 1.0 / kappa or hi > kappa):
        raise EllipticityError(
            f"eigenvalues [{lo:g}, {hi:g}] outside [1/{kappa:g}, {kappa:g}]"
        )
    return lo, hi


class DirichletSolver:
    """Reusable solver for ``A u = b`` with Dirichlet identity rows.

    Factorizes once with SuperLU for ``n <= DIRECT_SOLVE_MAX_N``; above that
    it runs ILU-preconditioned BiCGStab with relative tolerance ``rtol``.
    """

    def __init__(self, A: sp.spmatrix, n: int, rtol: float = ITERATIVE_RTOL):
        self.A = sp.csc_matrix(A)
        self.rtol = rtol
        self.direct = n <= DIRECT_SOLVE_MAX_N
        try:
            if self.direct:
                self._lu = spla.splu(self.A)
            else:
                ilu = spla.spilu(self.A, drop_tol=1e-5, fill_factor=20)
                self._prec = spla.LinearOperator(self.A.shape, ilu.solve)
        except RuntimeError as exc:
            raise SolverError(f"factorization failed: {exc}") from exc

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if self.direct:
            x = self._lu.solve(b)
        else:
            cols = b.reshape(b.shape[0], -1)
            out = np.empty_like(cols)
            for k in range(cols.shape[1]):
                xk, info = spla.bicgstab(self.A, cols[:, k], rtol=self.rtol, M=self._prec)
                if info != 0:
                    raise SolverError(f"BiCGStab did not converge (info={info})")
                out[:, k] = xk
            x = out.reshape(b.shape)
        if not np.all(np.isfinite(x)):
            raise SolverError("linear solve produced non-finite values")
        return x


def _dirichlet_rhs(grid: Grid, rhs: np.ndarray, boundary: np.ndarray) -> np.ndarray:
    b = np.where(grid.boundary_mask, boundary, rhs)
    return b.ravel()


@functools.lru_cache(maxsize=4)
def _poisson_solver(grid: Grid) -> DirichletSolver:
    return DirichletSolver(impose_dirichlet_rows(grid, laplacian_5pt(grid)), grid.n)


def solve_poisson_dirichlet(grid: Grid, rhs: np.ndarray, boundary: np.ndarray) -> np.ndarray:
    """Solve ``Lap_h u = rhs`` (5-point) at interior nodes, ``u = boundary`` on edges.

    Only the boundary nodes of ``boundary`` are read.
    """
    rhs = grid.check(rhs)
    boundary = grid.check(boundary)
    if not np.all(np.isfinite(rhs)):
        raise ValueError("Poisson right-hand side is not finite")
    u = _poisson_solver(grid).solve(_dirichlet_rhs(grid, rhs, boundary))
    return u.reshape(grid.shape)


def solve_general_elliptic(
    grid: Grid,
    coeff: np.ndarray,
    boundary: np.ndarray,
    kappa: float | None = None,
) -> np.ndarray:
    """Solve ``-div(coeff grad u) = 0`` with Dirichlet data.

    ``boundary`` may be a single scalar field or a stack of them with shape
    ``(k, n+1, n+1)``; the operator is factorized once for all of them.
    """
    coeff = grid.check(coeff, "matrix")
    check_ellipticity(coeff, kappa)
    solver = DirichletSolver(impose_dirichlet_rows(grid, elliptic_operator(grid, coeff)), grid.n)
    return solve_many(grid, solver, boundary)


def solve_many(grid: Grid, solver: DirichletSolver, boundary: np.ndarray) -> np.ndarray:
    """Solve the homogeneous problem for one or several Dirichlet traces."""
    boundary = np.asarray(boundary, dtype=float)
    single = boundary.ndim == 2
    stack = boundary[None] if single else boundary
    if stack.shape[1:] != grid.shape:
        raise ValueError("boundary data does not match grid")
    bmask = grid.boundary_mask
    B = np.where(bmask[None], stack, 0.0).reshape(len(stack), -1).T
    U = solver.solve(np.ascontiguousarray(B))
    U = U.reshape(grid.size, len(stack)).T.reshape(stack.shape)
    return U[0] if single else U


def save_field_csv(path, field: np.ndarray) -> None:
    """Write a scalar field, one grid line per row, 17 significant digits."""
    np.savetxt(path, np.asarray(field, dtype=float), delimiter=",", fmt="%.17g")


def load_field_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)
