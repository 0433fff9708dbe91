"""GKSL generators, semigroup propagation and the jump / no-jump decomposition.

Units: hbar = 1. The generator is

    L[rho] = -i[H, rho] + sum_k gamma_k (L_k rho L_k^dag - 1/2 {L_k^dag L_k, rho})

and splits as ``L = L_R + J`` with the trace-decreasing no-jump part
``L_R[rho] = -i H_eff rho + i rho H_eff^dag``, ``H_eff = H - i/2 sum_k gamma_k L_k^dag L_k``,
and the jump map ``J[rho] = sum_k gamma_k L_k rho L_k^dag``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidInputError
from .qcore import HERM_TOL, QuantumMap, as_square, hermiticity_defect, unvec, vec


@dataclass(frozen=True, eq=False)
class GKSLModel:
    """Hamiltonian plus ``(rate, Lindblad operator)`` channels."""

    H: np.ndarray
    channels: tuple = ()

    def __post_init__(self):
        h = as_square(self.H, "Hamiltonian").copy()
        d = h.shape[0]
        defect = hermiticity_defect(h)
        if defect > HERM_TOL * max(1.0, float(np.abs(h).max(initial=0.0))):
            raise InvalidInputError(f"Hamiltonian is not Hermitian (defect {defect:.3e})")
        chans = []
        for k, (gamma, op) in enumerate(self.channels):
            gamma = float(gamma)
            if not np.isfinite(gamma) or gamma < 0:
                raise InvalidInputError(f"channel {k}: negative rate ({gamma})")
            op = as_square(op, f"channel {k} operator").copy()
            if op.shape != (d, d):
                raise InvalidInputError(f"channel {k}: operator shape {op.shape} does not match dim {d}")
            op.setflags(write=False)
            chans.append((gamma, op))
        h.setflags(write=False)
        object.__setattr__(self, "H", h)
        object.__setattr__(self, "channels", tuple(chans))

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    @classmethod
    def unitary(cls, h) -> "GKSLModel":
        return cls(h, ())

    @classmethod
    def trivial(cls, dim: int) -> "GKSLModel":
        """Zero generator: the identity family."""
        return cls(np.zeros((dim, dim), dtype=complex), ())

    def effective_hamiltonian(self) -> np.ndarray:
        loss = sum((g * op.conj().T @ op for g, op in self.channels), np.zeros_like(self.H))
        return self.H - 0.5j * loss


def lindblad_superoperator(m: GKSLModel) -> np.ndarray:
    d = m.dim
    eye = np.eye(d)
    out = -1j * (np.kron(eye, m.H) - np.kron(m.H.T, eye))
    for gamma, op in m.channels:
        ldl = op.conj().T @ op
        out = out + gamma * (np.kron(op.conj(), op) - 0.5 * np.kron(eye, ldl) - 0.5 * np.kron(ldl.T, eye))
    return out


def contraction_generator(m: GKSLModel) -> np.ndarray:
    """Superoperator generating the no-jump semigroup R(t)."""
    heff = m.effective_hamiltonian()
    eye = np.eye(m.dim)
    return -1j * np.kron(eye, heff) + 1j * np.kron(heff.conj(), eye)


def jump_superoperator(m: GKSLModel) -> np.ndarray:
    d = m.dim
    out = np.zeros((d * d, d * d), dtype=complex)
    for gamma, op in m.channels:
        out += gamma * np.kron(op.conj(), op)
    return out


def _check_time(t: float):
    if not np.isfinite(t) or t < 0:
        raise InvalidInputError(f"time must be nonnegative, got {t}")


def evolve_semigroup(m: GKSLModel, t: float) -> QuantumMap:
    """The dynamical map ``exp(t L)`` as a superoperator."""
    _check_time(t)
    return QuantumMap.from_superop(scipy.linalg.expm(t * lindblad_superoperator(m)))


def semigroup_propagators(m: GKSLModel, times) -> np.ndarray:
    """Stack of ``exp(t L)`` superoperators, one per time."""
    gen = lindblad_superoperator(m)
    times = np.asarray(times, dtype=float)
    for t in times:
        _check_time(t)
    return np.stack([scipy.linalg.expm(t * gen) for t in times])


def no_jump_kraus(m: GKSLModel, t: float) -> np.ndarray:
    return scipy.linalg.expm(-1j * t * m.effective_hamiltonian())


def contraction_semigroup(m: GKSLModel, t: float) -> QuantumMap:
    """R(t)[rho] = exp(-i H_eff t) rho exp(+i H_eff^dag t); CP and trace non-increasing."""
    _check_time(t)
    return QuantumMap.from_kraus([no_jump_kraus(m, t)])


def jump_map(m: GKSLModel) -> QuantumMap:
    if not m.channels:
        return QuantumMap.from_kraus([np.zeros((m.dim, m.dim), dtype=complex)])
    return QuantumMap.from_kraus([np.sqrt(g) * op for g, op in m.channels])


def dyson_nodes(m: GKSLModel, rho0, t: float, k_max: int, n_quad: int) -> tuple[np.ndarray, np.ndarray]:
    """Jump-number expansion of ``exp(t L) rho0`` on ``n_quad`` uniform nodes of ``[0, t]``.

    The k-jump term obeys ``X_k(s) = int_0^s R(s - r) J X_{k-1}(r) dr`` with
    ``X_0(s) = R(s) rho0``; each integral is a trapezoidal product quadrature on
    the fixed nodes. Returns ``(nodes, states)`` with states shaped ``(n_quad, d, d)``.
    """
    _check_time(t)
    if k_max < 0 or int(k_max) != k_max:
        raise InvalidInputError(f"k_max must be a nonnegative integer, got {k_max}")
    if n_quad < 2 or int(n_quad) != n_quad:
        raise InvalidInputError(f"n_quad must be an integer >= 2, got {n_quad}")
    rho0 = as_square(rho0, "rho0")
    d = m.dim
    if rho0.shape != (d, d):
        raise InvalidInputError("rho0 dimension does not match the model")
    nodes = np.linspace(0.0, t, n_quad)
    h = nodes[1] - nodes[0]
    heff = m.effective_hamiltonian()
    ks = np.stack([scipy.linalg.expm(-1j * s * heff) for s in nodes])
    r = np.einsum("nij,nkl->nikjl", ks.conj(), ks).reshape(n_quad, d * d, d * d)
    jump = jump_superoperator(m)

    x = r @ vec(rho0)
    total = x.copy()
    for _ in range(int(k_max)):
        y = x @ jump.T
        nxt = np.zeros_like(x)
        for j in range(1, n_quad):
            wts = np.ones(j + 1)
            wts[0] = wts[-1] = 0.5
            nxt[j] = h * np.einsum("iab,ib->a", r[j::-1], y[: j + 1] * wts[:, None])
        x = nxt
        total += x
    states = np.stack([unvec(row, (d, d)) for row in total])
    return nodes, states


def dyson_expansion(m: GKSLModel, rho0, t: float, k_max: int, n_quad: int) -> np.ndarray:
    """State at time ``t`` from the first ``k_max`` jump terms; converges to ``exp(t L) rho0``."""
    return dyson_nodes(m, rho0, t, k_max, n_quad)[1][-1]
