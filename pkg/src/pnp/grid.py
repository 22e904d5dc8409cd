"""Uniform cell-centered grids on intervals and rectangles.

Cells are numbered 1..n; the center of cell j is a + h*(j - 1/2), so the
domain faces x = a and x = b coincide with the outer cell faces and never
with a cell center.  Boundary data always attaches to faces.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidGridError

_H_MATCH_RTOL = 1e-12


@dataclass(frozen=True)
class Grid1D:
    """Uniform partition of [a, b] into n cells of width h."""

    a: float
    b: float
    n: int
    h: float

    @property
    def cell_volume(self) -> float:
        return self.h

    def cell_centers(self) -> np.ndarray:
        return self.a + self.h * (np.arange(1, self.n + 1) - 0.5)


@dataclass(frozen=True)
class Grid2D:
    """Uniform partition of [ax, bx] x [ay, by] with a single cell width h.

    Fields are stored as 2D arrays of shape (nx, ny); the row-major linear
    index of cell (i, j) is (i - 1) * ny + j for 1-based (i, j).
    """

    ax: float
    bx: float
    ay: float
    by: float
    nx: int
    ny: int
    h: float

    @property
    def cell_volume(self) -> float:
        return self.h * self.h

    def x_centers(self) -> np.ndarray:
        return self.ax + self.h * (np.arange(1, self.nx + 1) - 0.5)

    def y_centers(self) -> np.ndarray:
        return self.ay + self.h * (np.arange(1, self.ny + 1) - 0.5)

    def linear_index(self, i: int, j: int) -> int:
        """Row-major index of cell (i, j), all three 1-based."""
        if not (1 <= i <= self.nx and 1 <= j <= self.ny):
            raise IndexError(f"cell ({i}, {j}) outside {self.nx} x {self.ny} grid")
        return (i - 1) * self.ny + j


def build_grid_1d(a: float, b: float, n: int) -> Grid1D:
    """Build a 1D grid; requires b > a and n >= 2."""
    if not b > a:
        raise InvalidGridError(f"interval [{a}, {b}] has non-positive length")
    if n < 2:
        raise InvalidGridError(f"need at least 2 cells, got n={n}")
    return Grid1D(a=float(a), b=float(b), n=int(n), h=(b - a) / n)


def build_grid_2d(ax: float, bx: float, ay: float, by: float, nx: int, ny: int) -> Grid2D:
    """Build a 2D grid; both directions must share one cell width."""
    if not (bx > ax and by > ay):
        raise InvalidGridError("rectangle has non-positive extent")
    if nx < 2 or ny < 2:
        raise InvalidGridError(f"need at least 2 cells per direction, got {nx} x {ny}")
    hx = (bx - ax) / nx
    hy = (by - ay) / ny
    if abs(hx - hy) > _H_MATCH_RTOL * max(abs(hx), abs(hy)):
        raise InvalidGridError(f"cell widths differ: hx={hx!r}, hy={hy!r}")
    return Grid2D(ax=float(ax), bx=float(bx), ay=float(ay), by=float(by),
                  nx=int(nx), ny=int(ny), h=hx)
