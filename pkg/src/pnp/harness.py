"""Experiment catalog, reference-solution interpolation, and convergence studies.

A convergence study runs one test case on a ladder of grids plus one much
finer reference grid, interpolates the reference fields to the coarse cell
centers with a cubic spline, and reports max-norm errors together with the
observed orders log2(e(h) / e(h / 2)).

Two conventions matter for the potential column.  First, the potential is
defined only up to a constant and the solver pins it at the first cell,
whose center moves with h; before comparing, the interpolated reference is
re-pinned to the coarse grid's own pin location, which removes the O(h)
gauge offset between grids.  Second, reported errors are multiplied by
rho^2 / (rho^2 - 1) with rho = h / h_ref: for a second-order scheme the
reference carries the same error shape scaled by 1 / rho^2, so the raw
difference underestimates the true error by exactly that factor, which
would otherwise corrupt the observed order on the finest rung.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import CompatibilityError, InvalidGridError
from .grid import Grid1D, Grid2D, build_grid_1d, build_grid_2d
from .poisson import (
    BoundaryData1D,
    BoundaryData2D,
    charge_source,
    check_compatibility,
    solve_poisson_1d,
    solve_poisson_2d,
)
from .scheme import SpeciesState, max_stable_dt, step_coupled

CONVERGENCE_CSV_HEADER = "h,error_c,order_c,error_psi,order_psi"

# Fraction of the positivity-safe step used for accuracy runs: well below
# the stability bound so the first-order-in-time error stays subordinate
# to the second-order spatial error.
DEFAULT_K_FACTOR = 0.5


# ---------------------------------------------------------------------------
# Initial-condition profiles
# ---------------------------------------------------------------------------

def discretize(spec: dict, grid) -> np.ndarray:
    """Realize an initial-condition spec as cell values on a grid.

    Kinds: constant {value}; linear {left, right} (values at the domain
    ends, 1D); step {value, lo, hi} (1D, discretized by exact cell
    averages so the discrete mass matches the integral on any grid);
    product {x, y} (2D, outer product of two 1D specs); tabulated
    {values} (length n, or nx * ny row-major).
    """
    kind = spec.get("kind")
    if kind == "constant":
        value = float(spec["value"])
        shape = (grid.n,) if isinstance(grid, Grid1D) else (grid.nx, grid.ny)
        return np.full(shape, value)
    if kind == "tabulated":
        values = np.asarray(spec["values"], dtype=float)
        if isinstance(grid, Grid1D):
            if values.shape != (grid.n,):
                raise ValueError(f"tabulated values have length {values.size}, grid has {grid.n} cells")
            return values.copy()
        if values.size != grid.nx * grid.ny:
            raise ValueError(f"tabulated values have length {values.size}, grid has {grid.nx * grid.ny} cells")
        return values.reshape(grid.nx, grid.ny).copy()
    if kind == "product":
        if not isinstance(grid, Grid2D):
            raise ValueError("product profiles are 2D only")
        cx = _discretize_axis(spec["x"], grid.ax, grid.bx, grid.nx, grid.h)
        cy = _discretize_axis(spec["y"], grid.ay, grid.by, grid.ny, grid.h)
        return np.outer(cx, cy)
    if kind in ("linear", "step"):
        if not isinstance(grid, Grid1D):
            raise ValueError(f"{kind} profiles are 1D (use product form in 2D)")
        return _discretize_axis(spec, grid.a, grid.b, grid.n, grid.h)
    raise ValueError(f"unknown initial-condition kind {kind!r}")


def _discretize_axis(spec: dict, a: float, b: float, n: int, h: float) -> np.ndarray:
    kind = spec.get("kind")
    if kind == "constant":
        return np.full(n, float(spec["value"]))
    if kind == "linear":
        left, right = float(spec["left"]), float(spec["right"])
        x = a + h * (np.arange(1, n + 1) - 0.5)
        return left + (right - left) * (x - a) / (b - a)
    if kind == "step":
        value, lo, hi = float(spec["value"]), float(spec["lo"]), float(spec["hi"])
        # overlap fraction per cell, computed in index units so fully
        # covered cells get exactly `value`
        lo_i, hi_i = (lo - a) / h, (hi - a) / h
        j = np.arange(n)
        overlap = np.clip(np.minimum(hi_i, j + 1) - np.maximum(lo_i, j), 0.0, 1.0)
        return value * overlap
    raise ValueError(f"initial-condition kind {kind!r} not usable along one axis")


# ---------------------------------------------------------------------------
# Test cases
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpeciesSpec:
    name: str
    charge: float
    initial: dict


@dataclass(frozen=True)
class TestCase:
    """A complete run setup: domain, species, boundary data, horizon."""

    name: str
    dimension: int
    extent: tuple
    species: tuple
    boundary: object
    t_final: float
    steady_energy: Optional[float]
    description: str

    def make_grid(self, n: int):
        if self.dimension == 1:
            a, b = self.extent
            return build_grid_1d(a, b, n)
        ax, bx, ay, by = self.extent
        return build_grid_2d(ax, bx, ay, by, n, n)

    def grid_from_h(self, h: float):
        length = self.extent[1] - self.extent[0]
        n = round(length / h)
        if n < 2 or abs(n * h - length) > 1e-9 * length:
            raise InvalidGridError(f"h={h!r} does not evenly divide the domain of {self.name}")
        return self.make_grid(n)

    def initial_states(self, grid) -> list:
        return [SpeciesState(c=discretize(sp.initial, grid), q=sp.charge)
                for sp in self.species]

    def verify_compatibility(self, grid, tol: float = 1e-10) -> float:
        states = self.initial_states(grid)
        source = charge_source([s.c for s in states], [s.q for s in states])
        defect = check_compatibility(source, self.boundary, grid)
        if abs(defect) > tol:
            raise CompatibilityError(
                f"case {self.name}: initial data and boundary flux do not balance "
                f"(defect {defect:.3e})", defect=defect)
        return defect


def builtin_cases() -> list:
    """The bundled test cases: three 1D single-species neutral systems,
    three 1D two-species pairs, and two 2D single-species squares."""
    bc1 = BoundaryData1D(sigma_a=-1.0, sigma_b=0.0)
    one = lambda spec: (SpeciesSpec("c1", 1.0, spec),)
    pair = lambda s1, s2: (SpeciesSpec("c1", 1.0, s1), SpeciesSpec("c2", -1.0, s2))
    cases = [
        TestCase("1d-const", 1, (0.0, 1.0), one({"kind": "constant", "value": 1.0}),
                 bc1, 0.5, 0.15375, "uniform unit-mass start"),
        TestCase("1d-linear", 1, (0.0, 1.0), one({"kind": "linear", "left": 2.0, "right": 0.0}),
                 bc1, 0.5, 0.15375, "decreasing ramp, unit mass"),
        TestCase("1d-step", 1, (0.0, 1.0), one({"kind": "step", "value": 2.0, "lo": 0.5, "hi": 1.0}),
                 bc1, 0.5, 0.15375, "discontinuous start, empty left half"),
        TestCase("1d-ions-const", 1, (0.0, 1.0),
                 pair({"kind": "constant", "value": 2.0}, {"kind": "constant", "value": 1.0}),
                 bc1, 0.5, 1.5147, "oppositely charged pair, uniform start"),
        TestCase("1d-ions-linear", 1, (0.0, 1.0),
                 pair({"kind": "linear", "left": 4.0, "right": 0.0},
                      {"kind": "linear", "left": 0.0, "right": 2.0}),
                 bc1, 0.5, 1.5147, "oppositely charged pair, opposing ramps"),
        TestCase("1d-ions-crossed", 1, (0.0, 1.0),
                 pair({"kind": "linear", "left": 0.0, "right": 4.0},
                      {"kind": "linear", "left": 2.0, "right": 0.0}),
                 bc1, 0.5, 1.5147, "oppositely charged pair, crossed ramps"),
        TestCase("2d-const-all-edges", 2, (0.0, 1.0, 0.0, 1.0),
                 one({"kind": "constant", "value": 4.0}),
                 BoundaryData2D.uniform(-1.0), 0.05, None,
                 "uniform start, inward flux on every edge"),
        TestCase("2d-const-two-edges", 2, (0.0, 1.0, 0.0, 1.0),
                 one({"kind": "constant", "value": 2.0}),
                 BoundaryData2D(left=0.0, right=-1.0, bottom=-1.0, top=0.0), 0.05, None,
                 "uniform start, inward flux on right and bottom edges only"),
    ]
    for case in cases:
        case.verify_compatibility(case.make_grid(16))
        case.verify_compatibility(case.make_grid(13))
    return cases


def case_by_name(name: str) -> TestCase:
    for case in builtin_cases():
        if case.name == name:
            return case
    known = ", ".join(c.name for c in builtin_cases())
    raise KeyError(f"unknown case {name!r}; known cases: {known}")


# ---------------------------------------------------------------------------
# Reference interpolation and error norms
# ---------------------------------------------------------------------------

def cubic_spline_eval(knots, values, queries) -> np.ndarray:
    """Interpolating cubic spline through (knots, values) evaluated at queries.

    Uses not-a-knot end conditions, so the spline reproduces cubics
    exactly, end intervals included; natural ends would inject an O(h^2)
    error near the boundary wherever the sampled field has curvature
    there, large enough to dominate fine-grid potential comparisons.
    Requires at least 4 strictly increasing knots.  Queries outside the
    knot range are evaluated with the end polynomial, which covers coarse
    cell centers that fall within half a cell of the domain boundary.
    """
    knots = np.asarray(knots, dtype=float)
    values = np.asarray(values, dtype=float)
    if knots.ndim != 1 or knots.size < 4:
        raise ValueError("need at least 4 spline knots")
    if np.any(np.diff(knots) <= 0):
        raise ValueError("spline knots must be strictly increasing")
    spline = CubicSpline(knots, values, bc_type="not-a-knot", extrapolate=True)
    return spline(np.asarray(queries, dtype=float))


def linf_error(field, points, reference: Callable) -> float:
    """Max-norm difference between a field and a reference evaluated at points."""
    return float(np.max(np.abs(np.asarray(field, dtype=float) - reference(points))))


def _spline_2d(x_knots, y_knots, z, xq, yq) -> np.ndarray:
    """Tensor-product cubic spline: along y first, then along x."""
    along_y = CubicSpline(y_knots, z, axis=1, bc_type="not-a-knot", extrapolate=True)(yq)
    return CubicSpline(x_knots, along_y, axis=0, bc_type="not-a-knot", extrapolate=True)(xq)


@dataclass(frozen=True)
class ConvergenceRow:
    h: float
    error_c: float
    order_c: Optional[float]
    error_psi: float
    order_psi: Optional[float]


def observed_orders(rows: Sequence[ConvergenceRow]) -> list:
    """Fill the order columns from successive error ratios under h halving."""
    out = []
    for idx, row in enumerate(rows):
        if idx == 0:
            out.append(replace(row, order_c=None, order_psi=None))
            continue
        prev = rows[idx - 1]
        out.append(replace(
            row,
            order_c=_order(prev.error_c, row.error_c),
            order_psi=_order(prev.error_psi, row.error_psi),
        ))
    return out


def _order(coarse_err: float, fine_err: float) -> Optional[float]:
    if coarse_err <= 0.0 or fine_err <= 0.0:
        return None
    return math.log2(coarse_err / fine_err)


# ---------------------------------------------------------------------------
# Simulation driver and the study itself
# ---------------------------------------------------------------------------

def simulate_to_time(case: TestCase, grid, t_final: float, *,
                     k_factor: float = DEFAULT_K_FACTOR):
    """Advance a case to exactly t_final; returns (states, psi).

    The step is k_factor times the positivity-safe step; the last step is
    shortened to land on t_final, and the returned potential is re-solved
    from the final concentrations.
    """
    states = case.initial_states(grid)
    bc = case.boundary
    k = k_factor * max_stable_dt(states, bc, grid)
    t = 0.0
    while t < t_final:
        remaining = t_final - t
        if remaining <= k * (1.0 + 1e-12):
            states, _, _ = step_coupled(states, bc, grid, remaining, t=t)
            break
        states, _, _ = step_coupled(states, bc, grid, k, t=t)
        t += k
    source = charge_source([s.c for s in states], [s.q for s in states])
    if isinstance(grid, Grid1D):
        psi = solve_poisson_1d(source, bc, grid)
    else:
        psi = solve_poisson_2d(source, bc, grid)
    return states, psi


def run_convergence_study(case: TestCase, hs: Sequence[float], h_ref: float,
                          t_final: Optional[float] = None, *,
                          k_factor: float = DEFAULT_K_FACTOR) -> list:
    """Errors and observed orders against a fine-grid reference solution.

    The reference fields are splined onto each coarse grid's cell centers;
    concentration errors take the worst species.  Requires h_ref < min(hs).
    """
    if not hs:
        raise ValueError("need at least one grid spacing")
    if h_ref >= min(hs):
        raise ValueError("reference spacing must be finer than every study spacing")
    if t_final is None:
        t_final = case.t_final

    ref_grid = case.grid_from_h(h_ref)
    ref_states, ref_psi = simulate_to_time(case, ref_grid, t_final, k_factor=k_factor)

    rows = []
    for h in hs:
        grid = case.grid_from_h(h)
        states, psi = simulate_to_time(case, grid, t_final, k_factor=k_factor)
        rho2 = (h / h_ref) ** 2
        finite_ref = rho2 / (rho2 - 1.0)
        if case.dimension == 1:
            xq = grid.cell_centers()
            xr = ref_grid.cell_centers()
            err_c = max(
                linf_error(s.c, xq, lambda p, rc=rs.c: cubic_spline_eval(xr, rc, p))
                for s, rs in zip(states, ref_states))
            diff = psi - cubic_spline_eval(xr, ref_psi, xq)
            err_psi = float(np.max(np.abs(diff - diff[0])))
        else:
            xq, yq = grid.x_centers(), grid.y_centers()
            xr, yr = ref_grid.x_centers(), ref_grid.y_centers()
            err_c = max(
                float(np.max(np.abs(s.c - _spline_2d(xr, yr, rs.c, xq, yq))))
                for s, rs in zip(states, ref_states))
            diff = psi - _spline_2d(xr, yr, ref_psi, xq, yq)
            err_psi = float(np.max(np.abs(diff - diff[0, 0])))
        rows.append(ConvergenceRow(h=h, error_c=err_c * finite_ref, order_c=None,
                                   error_psi=err_psi * finite_ref, order_psi=None))
    return observed_orders(rows)


def format_convergence_csv(rows: Sequence[ConvergenceRow]) -> str:
    lines = [CONVERGENCE_CSV_HEADER]
    for row in rows:
        lines.append(",".join([
            repr(float(row.h)),
            repr(float(row.error_c)),
            "" if row.order_c is None else repr(float(row.order_c)),
            repr(float(row.error_psi)),
            "" if row.order_psi is None else repr(float(row.order_psi)),
        ]))
    return "\n".join(lines) + "\n"
