"""Independent brute-force references used by the test suite.

Everything here is deliberately written the slow, obvious way (dense
matrices, explicit loops, the raw g = c * exp(q * psi) change of
variables) so it shares no code path with the solver it checks.
"""
from __future__ import annotations

import numpy as np


def dense_pinned_poisson_1d(source, sigma_a, sigma_b, h):
    """Assemble the pinned tridiagonal system densely and solve it."""
    s = np.asarray(source, dtype=float)
    n = s.size
    mat = np.zeros((n, n))
    rhs = np.zeros(n)
    mat[0, 0] = 1.0
    for j in range(1, n - 1):
        mat[j, j - 1] = 1.0
        mat[j, j] = -2.0
        mat[j, j + 1] = 1.0
        rhs[j] = -s[j] * h * h
    mat[n - 1, n - 2] = 1.0
    mat[n - 1, n - 1] = -1.0
    rhs[n - 1] = -s[n - 1] * h * h - sigma_b * h
    return np.linalg.solve(mat, rhs)


def dense_pinned_poisson_2d(source, bc, h):
    """Assemble the pinned five-point system densely and solve it.

    bc carries per-edge outward normal derivatives (left/right/bottom/top);
    each missing neighbor is eliminated by the ghost relation
    psi_ghost = psi_inner + sigma_edge * h.
    """
    s = np.asarray(source, dtype=float)
    nx, ny = s.shape
    n = nx * ny
    mat = np.zeros((n, n))
    rhs = np.zeros(n)

    def k(i, j):
        return i * ny + j

    for i in range(nx):
        for j in range(ny):
            row = k(i, j)
            diag = 0.0
            for i2, j2, sigma in ((i - 1, j, bc.left), (i + 1, j, bc.right),
                                  (i, j - 1, bc.bottom), (i, j + 1, bc.top)):
                if 0 <= i2 < nx and 0 <= j2 < ny:
                    mat[row, k(i2, j2)] = 1.0
                    diag -= 1.0
                else:
                    rhs[row] -= sigma * h
            mat[row, row] = diag
            rhs[row] -= s[i, j] * h * h
    mat[0, :] = 0.0
    mat[0, 0] = 1.0
    rhs[0] = 0.0
    return np.linalg.solve(mat, rhs).reshape(nx, ny)


def g_form_rhs_1d(c, q, psi, h):
    """Rate of change computed from g = c * exp(q * psi) explicitly."""
    c = np.asarray(c, dtype=float)
    psi = np.asarray(psi, dtype=float)
    n = c.size
    g = c * np.exp(q * psi)
    flux = np.zeros(n + 1)
    for j in range(1, n):
        weight = np.exp(-q * (psi[j] + psi[j - 1]) / 2)
        flux[j] = weight * (g[j] - g[j - 1]) / h
    return np.diff(flux) / h


def g_form_rhs_2d(c, q, psi, h):
    """Dimension-by-dimension version of the explicit g-form rate."""
    c = np.asarray(c, dtype=float)
    psi = np.asarray(psi, dtype=float)
    nx, ny = c.shape
    g = c * np.exp(q * psi)
    out = np.zeros_like(c)
    for j in range(ny):
        flux = np.zeros(nx + 1)
        for i in range(1, nx):
            weight = np.exp(-q * (psi[i, j] + psi[i - 1, j]) / 2)
            flux[i] = weight * (g[i, j] - g[i - 1, j]) / h
        out[:, j] += np.diff(flux) / h
    for i in range(nx):
        flux = np.zeros(ny + 1)
        for j in range(1, ny):
            weight = np.exp(-q * (psi[i, j] + psi[i, j - 1]) / 2)
            flux[j] = weight * (g[i, j] - g[i, j - 1]) / h
        out[i, :] += np.diff(flux) / h
    return out


def random_compatible_1d(rng, n, h, n_species=1, charge_choices=(-2.0, -1.0, 1.0, 2.0)):
    """Nonnegative concentrations plus boundary data with zero defect."""
    concentrations = [rng.uniform(0.0, 3.0, size=n) for _ in range(n_species)]
    charges = [float(rng.choice(charge_choices)) for _ in range(n_species)]
    total = h * sum(q * c.sum() for c, q in zip(concentrations, charges))
    sigma_a = float(rng.uniform(-2.0, 2.0))
    sigma_b = -total - sigma_a
    return concentrations, charges, sigma_a, sigma_b


def random_compatible_2d(rng, nx, ny, h, n_species=1):
    """2D analogue; the top edge closes the balance."""
    concentrations = [rng.uniform(0.0, 3.0, size=(nx, ny)) for _ in range(n_species)]
    charges = [float(rng.choice([-2.0, -1.0, 1.0, 2.0])) for _ in range(n_species)]
    total = h * h * sum(q * c.sum() for c, q in zip(concentrations, charges))
    left, right, bottom = (float(v) for v in rng.uniform(-1.5, 1.5, size=3))
    top = -(total + h * (ny * (left + right) + nx * bottom)) / (h * nx)
    return concentrations, charges, left, right, bottom, top
