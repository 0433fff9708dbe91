"""Benchmark models with known closed-form behaviour."""
from __future__ import annotations

import numpy as np

from .gksl import GKSLModel
from .nonmarkov import DynamicsFamily
from .qcore import SIGMA_MINUS, SIGMA_PLUS, SIGMA_X, SIGMA_Z, QuantumMap, unitary_map
from .semimarkov.classical import ClassicalSemiMarkov
from .semimarkov.phasetype import PhaseTypeWTD, erlang
from .semimarkov.quantum import SemiMarkovModel


def amplitude_damping(gamma: float = 1.0, omega: float = 0.0) -> GKSLModel:
    """Decay |1> -> |0>; the excited population is ``p(0) exp(-gamma t)``."""
    return GKSLModel(0.5 * omega * SIGMA_Z, [(gamma, SIGMA_MINUS)])


def dephasing(gamma: float = 1.0, omega: float = 0.0) -> GKSLModel:
    """Pure dephasing; coherences decay as ``exp(-2 gamma t)``."""
    return GKSLModel(0.5 * omega * SIGMA_Z, [(gamma, SIGMA_Z)])


def balanced_qubit(gamma: float = 0.5, gamma_z: float = 0.2, omega: float = 0.7) -> GKSLModel:
    """Qubit semigroup whose total jump rate does not depend on the state.

    Decay and excitation at equal rates plus dephasing give
    ``sum_k gamma_k L_k^dag L_k = (gamma + gamma_z) 1``.
    """
    return GKSLModel(0.5 * omega * SIGMA_Z, [(gamma, SIGMA_MINUS), (gamma, SIGMA_PLUS), (gamma_z, SIGMA_Z)])


def bit_flip_map() -> QuantumMap:
    return unitary_map(SIGMA_X)


def bit_flip_semimarkov(wtd: PhaseTypeWTD | None = None, F: GKSLModel | None = None) -> SemiMarkovModel:
    """Bit flip at every jump; by default Erlang-2 waiting times at rate 1 and no free evolution.

    With ``F`` trivial and ``erlang(2, lam)`` the ground population starting from
    ``|0>`` is ``(1 + exp(-lam t) (cos lam t + sin lam t)) / 2``.
    """
    wtd = erlang(2, 1.0) if wtd is None else wtd
    F = GKSLModel.trivial(2) if F is None else F
    return SemiMarkovModel(bit_flip_map(), F, wtd)


def erlang_parity(t, rate: float = 1.0):
    """``E[(-1)^N_t]`` for an Erlang-2 renewal process."""
    t = np.asarray(t, dtype=float)
    return np.exp(-rate * t) * (np.cos(rate * t) + np.sin(rate * t))


def noncommuting_semimarkov(wtd: PhaseTypeWTD | None = None, gamma: float = 0.4, omega: float = 0.6) -> SemiMarkovModel:
    """Bit-flip jumps with dephasing free evolution; the two do not commute."""
    return bit_flip_semimarkov(wtd, dephasing(gamma, omega))


def commuting_semimarkov(wtd: PhaseTypeWTD | None = None, gamma: float = 0.4, omega: float = 0.6) -> SemiMarkovModel:
    """Phase-flip jumps with dephasing free evolution; all superoperators are diagonal."""
    wtd = erlang(2, 1.0) if wtd is None else wtd
    return SemiMarkovModel(unitary_map(SIGMA_Z), dephasing(gamma, omega), wtd)


def telegraph(wtd: PhaseTypeWTD | None = None) -> ClassicalSemiMarkov:
    wtd = erlang(2, 1.0) if wtd is None else wtd
    return ClassicalSemiMarkov.uniform([[0.0, 1.0], [1.0, 0.0]], wtd)


def cyclic(n: int = 3, wtd: PhaseTypeWTD | None = None) -> ClassicalSemiMarkov:
    """Deterministic shift ``m -> m + 1 mod n``."""
    wtd = erlang(2, 1.0) if wtd is None else wtd
    return ClassicalSemiMarkov.uniform(np.roll(np.eye(n), 1, axis=0), wtd)


def gad_superop(eta: float, q: float) -> np.ndarray:
    """Generalized amplitude damping: Bloch ``x, y -> sqrt(eta)``, ``z -> eta z + (1 - eta)(2q - 1)``."""
    a, b = np.sqrt(q), np.sqrt(1 - q)
    se, sl = np.sqrt(eta), np.sqrt(1 - eta)
    kraus = [
        a * np.array([[1, 0], [0, se]]),
        a * np.array([[0, sl], [0, 0]]),
        b * np.array([[se, 0], [0, 1]]),
        b * np.array([[0, 0], [sl, 0]]),
    ]
    return QuantumMap.from_kraus(kraus).superop


def oscillating_gad_family(grid, amplitude: float = 0.45, frequency: float = 6.0) -> DynamicsFamily:
    """Damping towards a stationary state whose excitation oscillates in time.

    ``eta = exp(-t)`` and ``q(t) = 1/2 + amplitude sin(frequency t)``. The trace
    distance of any pair only shrinks (the shift cancels in differences) but the
    family is not P-divisible, which unequal-weight Helstrom norms detect.
    """
    grid = np.asarray(grid, dtype=float)
    maps = [gad_superop(np.exp(-t), 0.5 + amplitude * np.sin(frequency * t)) for t in grid]
    maps[0] = np.eye(4)
    return DynamicsFamily(2, grid, np.array(maps))
