"""Free energy, dissipation rate, and steady-state detection.

The discrete free energy of a multi-species state is

    F = sum_i sum_cells (c ln c + q c psi / 2) * vol + boundary term,

where the boundary term is (sigma_a psi_1 + sigma_b psi_n) / 2 on an
interval and (h / 2) * sum over boundary faces of sigma * psi at the
adjacent cell on a rectangle (the direct analogue; both reduce to the
same expression on a one-cell-wide strip).  F is invariant under the
gauge constant of psi and non-increasing along trajectories of the
semi-discrete scheme; its exact rate of change is the nonpositive
quadratic form returned by `dissipation_rate`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import xlogy

from .grid import Grid1D
from .scheme import SpeciesState

STEADY_RESIDUAL_TOL = 1e-8
STEADY_G_FLATNESS_TOL = 1e-6


@dataclass(frozen=True)
class EnergyReport:
    """Free energy split into its three parts, plus the dissipation rate.

    `dissipation` is None when any cell has zero concentration (ln g is
    undefined there); runs carry on and report the value as missing.
    """

    free_energy: float
    entropy_part: float
    potential_part: float
    boundary_part: float
    dissipation: Optional[float]


@dataclass(frozen=True)
class SteadyStateReport:
    residual: float
    g_flatness: float
    converged: bool


def _boundary_energy(psi: np.ndarray, bc, grid) -> float:
    if isinstance(grid, Grid1D):
        return 0.5 * (bc.sigma_a * psi[0] + bc.sigma_b * psi[-1])
    h = grid.h
    return 0.5 * h * (bc.left * np.sum(psi[0, :]) + bc.right * np.sum(psi[-1, :])
                      + bc.bottom * np.sum(psi[:, 0]) + bc.top * np.sum(psi[:, -1]))


def free_energy(states: Sequence[SpeciesState], psi: np.ndarray, bc, grid) -> EnergyReport:
    """Evaluate F and its parts for the given state and potential.

    Cells with c = 0 contribute nothing to the entropy sum (the limit
    value of c ln c).
    """
    psi = np.asarray(psi, dtype=float)
    vol = grid.cell_volume
    entropy = 0.0
    potential = 0.0
    for s in states:
        entropy += vol * float(np.sum(xlogy(s.c, s.c)))
        potential += 0.5 * s.q * vol * float(np.sum(s.c * psi))
    boundary = float(_boundary_energy(psi, bc, grid))
    return EnergyReport(
        free_energy=entropy + potential + boundary,
        entropy_part=entropy,
        potential_part=potential,
        boundary_part=boundary,
        dissipation=dissipation_rate(states, psi, grid),
    )


def _face_dissipation(c_lo, c_hi, q, dpsi, h):
    """Sum over faces of (ln g_hi - ln g_lo)(g_hi - g_lo) e^{-q psi_mid}.

    Evaluated in increment form: the log difference is ln(c_hi / c_lo) +
    q * dpsi and the weighted g difference is c_hi e^{q dpsi / 2} -
    c_lo e^{-q dpsi / 2}, so no exponential of a full potential value is
    ever formed.
    """
    e = np.exp(0.5 * q * dpsi)
    dlng = np.log(c_hi / c_lo) + q * dpsi
    return float(np.sum(dlng * (c_hi * e - c_lo / e)))


def dissipation_rate(states: Sequence[SpeciesState], psi: np.ndarray, grid) -> Optional[float]:
    """Nonpositive rate dF/dt of the semi-discrete flow; None if some c = 0.

    Each face contributes -(ln g_R - ln g_L)(g_R - g_L) times a positive
    weight, and x ln x is monotone, so the total is <= 0, with equality
    exactly when g is constant (the equilibrium c = Z e^{-q psi}).
    """
    psi = np.asarray(psi, dtype=float)
    for s in states:
        if np.any(s.c <= 0.0):
            return None
    total = 0.0
    if isinstance(grid, Grid1D):
        for s in states:
            total += _face_dissipation(s.c[:-1], s.c[1:], s.q, np.diff(psi), grid.h)
        return -total / grid.h
    for s in states:
        total += _face_dissipation(s.c[:-1, :], s.c[1:, :], s.q, np.diff(psi, axis=0), grid.h)
        total += _face_dissipation(s.c[:, :-1], s.c[:, 1:], s.q, np.diff(psi, axis=1), grid.h)
    return -total


def _g_flatness(states: Sequence[SpeciesState], psi: np.ndarray) -> float:
    """Largest relative face jump of g = c e^{q psi} over all species.

    g is rescaled by exp(-max(q psi)) per species before exponentiating,
    which leaves the ratio unchanged and avoids overflow.
    """
    worst = 0.0
    for s in states:
        w = s.q * psi
        g = s.c * np.exp(w - w.max())
        top = float(g.max())
        if top <= 0.0:
            worst = np.inf
            continue
        jump = max(float(np.max(np.abs(np.diff(g, axis=axis)))) for axis in range(g.ndim))
        worst = max(worst, jump / top)
    return worst


def detect_steady(prev_states: Sequence[SpeciesState], next_states: Sequence[SpeciesState],
                  psi: np.ndarray, k: float, *,
                  tol_residual: float = STEADY_RESIDUAL_TOL,
                  tol_g: float = STEADY_G_FLATNESS_TOL) -> SteadyStateReport:
    """Stopping rule: small time derivative and near-constant g.

    The residual is the max norm of (c_next - c_prev) / k over species;
    g-flatness certifies that the state is an equilibrium c = Z e^{-q psi}
    rather than merely slow.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    psi = np.asarray(psi, dtype=float)
    residual = 0.0
    for p, n in zip(prev_states, next_states):
        residual = max(residual, float(np.max(np.abs(n.c - p.c))) / k)
    flat = _g_flatness(next_states, psi)
    return SteadyStateReport(residual=residual, g_flatness=flat,
                             converged=(residual < tol_residual and flat < tol_g))


def long_time_energy_stability(energies: Sequence[float], *, steady_index: Optional[int] = None,
                               step_tol: float = 1e-10, drift_tol: float = 1e-4) -> bool:
    """True iff F never rises by more than step_tol and, once steady,
    stays within drift_tol of its final value."""
    f = np.asarray(list(energies), dtype=float)
    if f.size < 2:
        return True
    if np.any(np.diff(f) > step_tol):
        return False
    if steady_index is not None:
        if np.max(np.abs(f[steady_index:] - f[-1])) > drift_tol:
            return False
    return True
