"""Trapezoidal product-integration for convolution master equations.

Solves ``d rho / dt = K0 rho(t) + int_0^t K(t - s) rho(s) ds`` on a uniform grid,
where ``K0`` is an optional instantaneous (delta) part and ``K`` is sampled at
the grid nodes. The outer derivative and the inner convolution are both
discretized with the trapezoidal rule, so the scheme is second order.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg

from ..errors import InvalidInputError
from ..qcore import as_square, unvec, vec
from . import talbot
from .quantum import SemiMarkovModel, _check_grid, _check_rho0, kernel_time_samples


def solve_volterra(kernel, rho0, grid, local=None) -> np.ndarray:
    """States on ``grid`` (shape ``(N, d, d)``) for kernel samples ``kernel`` of shape ``(N, d^2, d^2)``."""
    grid = _check_grid(grid, uniform=True)
    r0 = as_square(rho0, "rho0")
    d = r0.shape[0]
    d2 = d * d
    kern = np.asarray(kernel, dtype=complex)
    if kern.shape != (grid.size, d2, d2):
        raise InvalidInputError(f"kernel has shape {kern.shape}, expected {(grid.size, d2, d2)}")
    k0 = np.zeros((d2, d2), dtype=complex) if local is None else np.asarray(local, dtype=complex)
    if k0.shape != (d2, d2):
        raise InvalidInputError(f"local part has shape {k0.shape}, expected {(d2, d2)}")
    n = grid.size
    rho = np.zeros((n, d2), dtype=complex)
    rho[0] = vec(r0)
    if n == 1:
        return unvec(rho[0], (d, d))[None]
    h = grid[1] - grid[0]
    lu = scipy.linalg.lu_factor(np.eye(d2) - 0.5 * h * k0 - 0.25 * h * h * kern[0])
    deriv = k0 @ rho[0]
    for i in range(n - 1):
        # history part of h * trapz over [0, t_{i+1}] without the implicit end point
        hist = 0.5 * kern[i + 1] @ rho[0]
        if i > 0:
            hist = hist + np.einsum("jab,jb->a", kern[i:0:-1], rho[1:i + 1])
        hist *= h
        rhs = rho[i] + 0.5 * h * deriv + 0.5 * h * hist
        rho[i + 1] = scipy.linalg.lu_solve(lu, rhs)
        deriv = k0 @ rho[i + 1] + hist + 0.5 * h * kern[0] @ rho[i + 1]
    return np.stack([unvec(row, (d, d)) for row in rho])


def volterra_solution(model: SemiMarkovModel, rho0, grid, ordering: str = "micromaser",
                      n_nodes: int = talbot.DEFAULT_NODES) -> np.ndarray:
    """Solve the memory-kernel master equation of ``model`` with the kernel inverted on ``grid``."""
    r0 = _check_rho0(model, rho0)
    grid = _check_grid(grid, uniform=True)
    k0, samples = kernel_time_samples(model, grid, ordering, n_nodes)
    return solve_volterra(samples, r0, grid, local=k0)
