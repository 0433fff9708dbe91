"""Fixed-Talbot numerical inverse Laplace transform for matrix-valued transforms.

The Bromwich contour is deformed to ``u(theta) = r theta (cot theta + i)``,
``theta in (-pi, pi)``, with ``r = 2 M / (5 t)``. The trapezoidal rule with
``M`` points per half contour gives

    f(t) ~ (r / 2M) sum_{k=-(M-1)}^{M-1} exp(u_k t) F(u_k) (1 + i sigma_k),
    sigma(theta) = theta + (theta cot theta - 1) cot theta.

Both halves are summed because the transforms here are complex-matrix valued
and do not satisfy ``F(conj u) = conj F(u)``.
"""
from __future__ import annotations

import numpy as np

from ..errors import ContourError, InvalidInputError

DEFAULT_NODES = 32
POLE_MARGIN = 0.1


def talbot_nodes(t: float, n_nodes: int = DEFAULT_NODES) -> tuple[np.ndarray, np.ndarray]:
    """Contour points ``u_k`` and weights ``w_k`` with ``f(t) ~ sum_k w_k F(u_k)``."""
    if t <= 0:
        raise InvalidInputError(f"Talbot inversion needs t > 0, got {t}")
    if n_nodes < 2:
        raise InvalidInputError("need at least 2 Talbot nodes")
    m = int(n_nodes)
    r = 2.0 * m / (5.0 * t)
    theta = np.arange(-(m - 1), m) * np.pi / m
    u = np.empty(theta.size, dtype=complex)
    sigma = np.zeros(theta.size)
    nz = theta != 0
    th = theta[nz]
    cot = 1.0 / np.tan(th)
    u[nz] = r * th * (cot + 1j)
    u[~nz] = r
    sigma[nz] = th + (th * cot - 1.0) * cot
    w = (r / (2 * m)) * np.exp(u * t) * (1 + 1j * sigma)
    return u, w


def contour_real_part(y: float, r: float) -> float:
    """Real part of the contour at imaginary height ``|y| < r pi``."""
    y = abs(y)
    if y == 0:
        return r
    return y / np.tan(y / r)


def check_poles(poles, t: float, n_nodes: int = DEFAULT_NODES, margin: float = POLE_MARGIN):
    """Raise ContourError if any pole is not safely left of the contour used at time ``t``."""
    r = 2.0 * int(n_nodes) / (5.0 * t)
    for p in np.atleast_1d(poles):
        y = abs(p.imag)
        if y >= r * np.pi * (1 - margin) or p.real > contour_real_part(y, r) - margin * r:
            raise ContourError(complex(p), t)


def invert(transform, t: float, n_nodes: int = DEFAULT_NODES, poles=None):
    """Inverse Laplace transform at a single time ``t > 0``.

    ``transform`` maps a 1-d array of complex ``u`` to an array of shape
    ``(len(u), ...)``.
    """
    if poles is not None:
        check_poles(poles, t, n_nodes)
    u, w = talbot_nodes(t, n_nodes)
    vals = np.asarray(transform(u))
    return np.tensordot(w, vals, axes=(0, 0))


def invert_many(transform, times, n_nodes: int = DEFAULT_NODES, poles=None, chunk: int = 4096):
    """Vectorized :func:`invert` over positive times; ``transform`` is called on batches of nodes."""
    times = np.asarray(times, dtype=float)
    if poles is not None:
        for t in times:
            check_poles(poles, t, n_nodes)
    nodes = [talbot_nodes(t, n_nodes) for t in times]
    us = np.concatenate([u for u, _ in nodes])
    k = nodes[0][0].size if nodes else 0
    vals = [np.asarray(transform(us[i:i + chunk])) for i in range(0, us.size, chunk)]
    vals = np.concatenate(vals, axis=0) if vals else np.zeros((0,))
    out = []
    for n, (_, w) in enumerate(nodes):
        out.append(np.tensordot(w, vals[n * k:(n + 1) * k], axes=(0, 0)))
    return np.stack(out) if out else np.zeros((0,) + vals.shape[1:], dtype=complex)
