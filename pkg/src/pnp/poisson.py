"""Discrete Neumann Poisson solves with a pinned gauge.

The potential solves -lap(psi) = s subject to pure Neumann data, which
determines psi only up to an additive constant; the first cell is pinned
to zero to pick one representative.  Sign conventions on an interval
[a, b]: psi_x(a) = -sigma_a and psi_x(b) = sigma_b, i.e. sigma is the
outward normal derivative on both ends.  In 2D, sigma is an outward
normal derivative held constant along each rectangle edge.

The Neumann problem is solvable only when the boundary flux balances the
total charge; `check_compatibility` evaluates the signed defect and the
solvers refuse to run when it exceeds an absolute tolerance.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.sparse as sparse
from scipy.linalg import solve_banded
from scipy.sparse.linalg import splu

from .errors import SolverFailure, UnsolvableSystemError
from .grid import Grid1D, Grid2D

DEFAULT_COMPAT_TOL = 1e-10


@dataclass(frozen=True)
class BoundaryData1D:
    """Neumann data at the interval ends: psi_x(a) = -sigma_a, psi_x(b) = sigma_b."""

    sigma_a: float
    sigma_b: float


@dataclass(frozen=True)
class BoundaryData2D:
    """Outward-normal Neumann data, one constant per rectangle edge."""

    left: float
    right: float
    bottom: float
    top: float

    @classmethod
    def uniform(cls, sigma: float) -> "BoundaryData2D":
        return cls(sigma, sigma, sigma, sigma)

    def sigma_max(self) -> float:
        return max(abs(self.left), abs(self.right), abs(self.bottom), abs(self.top))


def charge_source(concentrations: Sequence[np.ndarray], charges: Sequence[float]) -> np.ndarray:
    """Effective source sum_i q_i * c_i on the shared grid."""
    if len(concentrations) != len(charges):
        raise ValueError("one charge per concentration field required")
    if not concentrations:
        raise ValueError("at least one species required")
    out = np.zeros_like(np.asarray(concentrations[0], dtype=float))
    for c, q in zip(concentrations, charges):
        out += q * np.asarray(c, dtype=float)
    return out


def check_compatibility(source, bc, grid) -> float:
    """Signed solvability defect: boundary flux integral plus total charge.

    Returns sigma_a + sigma_b + h * sum(s) in 1D and
    h * (per-edge face sums of sigma) + h^2 * sum(s) in 2D.  A Neumann
    solve exists only when this vanishes; callers treat |defect| above
    tolerance as fatal.
    """
    s = np.asarray(source, dtype=float)
    if isinstance(grid, Grid1D):
        return float(bc.sigma_a + bc.sigma_b + grid.h * np.sum(s))
    boundary = grid.ny * (bc.left + bc.right) + grid.nx * (bc.bottom + bc.top)
    return float(grid.h * boundary + grid.h ** 2 * np.sum(s))


def _require_compatible(source, bc, grid, tol: float) -> None:
    defect = check_compatibility(source, bc, grid)
    if abs(defect) > tol:
        raise UnsolvableSystemError(
            f"Neumann data and total charge do not balance: defect {defect:.6e} "
            f"exceeds tolerance {tol:.1e}", defect=defect)


def solve_poisson_1d(source, bc: BoundaryData1D, grid: Grid1D, *,
                     compat_tol: float = DEFAULT_COMPAT_TOL) -> np.ndarray:
    """Solve the pinned tridiagonal Neumann problem on a 1D grid.

    Row 1 pins psi_1 = 0.  Rows 2..n-1 carry the standard second
    difference psi_{j-1} - 2 psi_j + psi_{j+1} = -s_j h^2, and row n the
    one-sided closure psi_{n-1} - psi_n = -s_n h^2 - sigma_b h.  The
    discarded closure at the left end (psi_2 - psi_1 = -s_1 h^2 -
    sigma_a h) holds automatically whenever the data are compatible.
    """
    _require_compatible(source, bc, grid, compat_tol)
    n, h = grid.n, grid.h
    s = np.asarray(source, dtype=float)
    if s.shape != (n,):
        raise ValueError(f"source has shape {s.shape}, expected ({n},)")

    # Banded storage for scipy: row 0 super-, row 1 main, row 2 sub-diagonal.
    ab = np.zeros((3, n))
    ab[0, 2:] = 1.0
    ab[1, 0] = 1.0
    ab[1, 1:-1] = -2.0
    ab[1, -1] = -1.0
    ab[2, :-1] = 1.0
    ab[2, -2] = 1.0

    rhs = -s * h * h
    rhs[0] = 0.0
    rhs[-1] -= bc.sigma_b * h

    try:
        psi = solve_banded((1, 1), ab, rhs)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - pinned matrix is regular
        raise SolverFailure(f"tridiagonal solve failed: {exc}") from exc
    # Re-impose the gauge exactly; a constant shift leaves every other row
    # of the difference operator unchanged.
    psi -= psi[0]
    psi[0] = 0.0
    return psi


def potential_increments_1d(psi: np.ndarray, bc: BoundaryData1D, grid: Grid1D) -> np.ndarray:
    """Face increments of the potential, length n + 1.

    A_0 = -h sigma_a and A_n = h sigma_b encode the Neumann closure at
    the outer faces; interior entries are A_j = psi_{j+1} - psi_j.  For a
    nonnegative source the sequence is non-increasing, which is what the
    positivity bound on the explicit update rests on.
    """
    psi = np.asarray(psi, dtype=float)
    a = np.empty(grid.n + 1)
    a[0] = -grid.h * bc.sigma_a
    a[1:-1] = np.diff(psi)
    a[-1] = grid.h * bc.sigma_b
    return a


def _assemble_pinned_2d(grid: Grid2D) -> sparse.csc_matrix:
    nx, ny = grid.nx, grid.ny
    n = nx * ny
    i = np.repeat(np.arange(nx), ny)
    j = np.tile(np.arange(ny), nx)
    # Diagonal is minus the number of in-domain neighbors.
    main = -4.0 + (i == 0) + (i == nx - 1) + (j == 0) + (j == ny - 1)
    off_y = np.ones(n - 1)
    off_y[ny - 1::ny] = 0.0  # no coupling across block (row) boundaries
    off_x = np.ones(n - ny)
    mat = sparse.diags(
        [main, off_y, off_y, off_x, off_x],
        [0, 1, -1, ny, -ny], format="lil")
    mat[0, :] = 0.0
    mat[0, 0] = 1.0
    return mat.tocsc()


@lru_cache(maxsize=16)
def _factorized_2d(grid: Grid2D):
    """LU factorization of the pinned 2D operator, cached per grid.

    The matrix depends only on the grid, never on sigma or the source,
    so one factorization serves every time step.
    """
    try:
        return splu(_assemble_pinned_2d(grid))
    except RuntimeError as exc:
        raise SolverFailure(f"2D Poisson factorization failed: {exc}") from exc


def _edge_load_2d(bc: BoundaryData2D, grid: Grid2D) -> np.ndarray:
    load = np.zeros((grid.nx, grid.ny))
    load[0, :] += bc.left
    load[-1, :] += bc.right
    load[:, 0] += bc.bottom
    load[:, -1] += bc.top
    return load


def solve_poisson_2d(source, bc: BoundaryData2D, grid: Grid2D, *,
                     compat_tol: float = DEFAULT_COMPAT_TOL) -> np.ndarray:
    """Solve the pinned five-point Neumann problem on a rectangle.

    Interior rows are the five-point Laplacian; each missing neighbor of
    a boundary cell is eliminated with the one-sided Neumann closure,
    which lowers the diagonal by one and moves sigma * h to the right
    side.  Cell (1, 1) is pinned to zero.  Returns psi with shape
    (nx, ny).
    """
    _require_compatible(source, bc, grid, compat_tol)
    s = np.asarray(source, dtype=float)
    if s.shape != (grid.nx, grid.ny):
        raise ValueError(f"source has shape {s.shape}, expected {(grid.nx, grid.ny)}")

    rhs = (-s * grid.h ** 2 - grid.h * _edge_load_2d(bc, grid)).ravel()
    rhs[0] = 0.0
    psi = _factorized_2d(grid).solve(rhs)
    if not np.all(np.isfinite(psi)):
        raise SolverFailure("2D Poisson solve produced non-finite values")
    psi = psi.reshape(grid.nx, grid.ny)
    psi -= psi[0, 0]
    psi[0, 0] = 0.0
    return psi
