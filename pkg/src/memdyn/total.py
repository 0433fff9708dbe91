"""Exact system + environment dynamics and the reduced maps they induce.

Composite operators live on ``H_S kron H_E`` with the system factor first.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .qcore import (
    HERM_TOL,
    QuantumMap,
    as_square,
    hermiticity_defect,
    partial_trace,
    tensor,
    trace_distance,
    validate_state,
)

MAX_ENV_DIM = 16
KRAUS_WEIGHT_CUTOFF = 1e-14


@dataclass(frozen=True, eq=False)
class BipartiteModel:
    d_S: int
    d_E: int
    H_total: np.ndarray
    rho_E: np.ndarray
    max_env_dim: int = MAX_ENV_DIM

    def __post_init__(self):
        if self.d_E > self.max_env_dim:
            raise InvalidInputError(f"environment dimension {self.d_E} exceeds the cap {self.max_env_dim}")
        h = as_square(self.H_total, "H_total").copy()
        if h.shape[0] != self.d_S * self.d_E:
            raise InvalidInputError(f"H_total has dimension {h.shape[0]}, expected {self.d_S * self.d_E}")
        defect = hermiticity_defect(h)
        if defect > HERM_TOL * max(1.0, float(np.abs(h).max(initial=0.0))):
            raise InvalidInputError(f"H_total is not Hermitian (defect {defect:.3e})")
        rho_e = validate_state(self.rho_E).copy()
        if rho_e.shape[0] != self.d_E:
            raise InvalidInputError("rho_E dimension does not match d_E")
        h.setflags(write=False)
        rho_e.setflags(write=False)
        object.__setattr__(self, "H_total", h)
        object.__setattr__(self, "rho_E", rho_e)
        w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
        object.__setattr__(self, "_spectrum", (w, v))


def exchange_model(g: float = 1.0, rho_E=None) -> BipartiteModel:
    """Qubit-qubit excitation exchange ``H = g (s+ kron s- + s- kron s+)``.

    With the environment in its ground state the system excited population is
    ``p(0) cos^2(g t)``.
    """
    sp = np.array([[0, 0], [1, 0]], dtype=complex)
    sm = sp.T.copy()
    h = g * (np.kron(sp, sm) + np.kron(sm, sp))
    if rho_E is None:
        rho_E = np.diag([1.0, 0.0]).astype(complex)
    return BipartiteModel(2, 2, h, rho_E)


def unitary_propagator(m: BipartiteModel, t: float) -> np.ndarray:
    """``exp(-i H_total t)`` from the Hermitian eigendecomposition."""
    w, v = m._spectrum
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def evolve_total(m: BipartiteModel, rho_se, t: float) -> np.ndarray:
    u = unitary_propagator(m, t)
    return u @ np.asarray(rho_se, dtype=complex) @ u.conj().T


def initial_total_state(m: BipartiteModel, rho_s0) -> np.ndarray:
    r = as_square(rho_s0, "rho_S0")
    if r.shape[0] != m.d_S:
        raise InvalidInputError(f"system state has dimension {r.shape[0]}, expected {m.d_S}")
    return tensor(r, m.rho_E)


def total_state(m: BipartiteModel, rho_s0, t: float) -> np.ndarray:
    return evolve_total(m, initial_total_state(m, rho_s0), t)


def reduced_state(m: BipartiteModel, rho_s0, t: float) -> np.ndarray:
    return partial_trace(total_state(m, rho_s0, t), m.d_S, m.d_E, "system")


def reduced_map_kraus(m: BipartiteModel, t: float) -> QuantumMap:
    """Kraus operators ``sqrt(lam_xi) <eta| U(t) |phi_xi>`` of the reduced map.

    ``{phi_xi}`` is the eigenbasis of ``rho_E`` (weights below 1e-14 dropped) and
    ``{eta}`` the computational basis of the environment.
    """
    u4 = unitary_propagator(m, t).reshape(m.d_S, m.d_E, m.d_S, m.d_E)
    lam, phi = np.linalg.eigh(m.rho_E)
    ops = []
    for weight, vec_e in zip(lam, phi.T):
        if weight <= KRAUS_WEIGHT_CUTOFF:
            continue
        block = np.einsum("aebf,f->eab", u4, vec_e)
        ops.extend(np.sqrt(weight) * block[eta] for eta in range(m.d_E))
    return QuantumMap.from_kraus(ops)


def info_internal(rho1_s, rho2_s) -> float:
    return trace_distance(rho1_s, rho2_s)


def info_external(rho1_se, rho2_se, d_s: int, d_e: int) -> float:
    """Total minus internal distinguishability; nonnegative by contraction under the partial trace."""
    r1s = partial_trace(rho1_se, d_s, d_e, "system")
    r2s = partial_trace(rho2_se, d_s, d_e, "system")
    return trace_distance(rho1_se, rho2_se) - trace_distance(r1s, r2s)


@dataclass(frozen=True)
class BoundReport:
    s: float
    t: float
    lhs: float
    rhs_terms: tuple[float, float, float]
    satisfied: bool

    @property
    def rhs(self) -> float:
        return sum(self.rhs_terms)


def check_bound(m: BipartiteModel, rho1_s0, rho2_s0, s: float, t: float, slack: float = 1e-9) -> BoundReport:
    """Growth of system distinguishability between ``s`` and ``t`` against correlations built up by ``s``."""
    if t < s or s < 0:
        raise InvalidInputError(f"need t >= s >= 0, got s={s}, t={t}")
    ds, de = m.d_S, m.d_E
    se1_s, se2_s = total_state(m, rho1_s0, s), total_state(m, rho2_s0, s)
    s1_s, s2_s = partial_trace(se1_s, ds, de), partial_trace(se2_s, ds, de)
    e1_s = partial_trace(se1_s, ds, de, "environment")
    e2_s = partial_trace(se2_s, ds, de, "environment")
    lhs = trace_distance(reduced_state(m, rho1_s0, t), reduced_state(m, rho2_s0, t)) - trace_distance(s1_s, s2_s)
    terms = (
        trace_distance(se1_s, tensor(s1_s, e1_s)),
        trace_distance(se2_s, tensor(s2_s, e2_s)),
        trace_distance(e1_s, e2_s),
    )
    return BoundReport(s, t, lhs, terms, lhs <= sum(terms) + slack)
