"""Classical semi-Markov jump processes on a finite set of sites.

Site ``m`` is left after a waiting time with density ``f_m``; the process then
jumps to ``n`` with probability ``pi[n, m]`` (columns of ``pi`` sum to one).
In the Laplace domain the one-point probabilities are

    P^(u) = diag(g^(u)) (1 - pi diag(f^(u)))^-1 P0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ..errors import InvalidInputError, UnsupportedEmbeddingError
from ..gksl import GKSLModel
from ..qcore import QuantumMap
from . import talbot
from .phasetype import PhaseTypeWTD
from .quantum import SemiMarkovModel, _check_grid

STOCHASTIC_TOL = 1e-12


def stochastic_violations(pi, tol: float = STOCHASTIC_TOL) -> list[str]:
    """Human-readable problems with a candidate column-stochastic matrix."""
    pi = np.asarray(pi, dtype=float)
    if pi.ndim != 2 or pi.shape[0] != pi.shape[1]:
        return [f"pi must be square, got shape {pi.shape}"]
    msgs = []
    if np.any(pi < 0):
        msgs.append("pi has negative entries")
    for m, s in enumerate(pi.sum(axis=0)):
        if abs(s - 1.0) > tol:
            msgs.append(f"pi column {m} sums to {s:.17g}, expected 1")
    return msgs


@dataclass(frozen=True, eq=False)
class ClassicalSemiMarkov:
    pi: np.ndarray
    wtds: tuple

    def __post_init__(self):
        msgs = stochastic_violations(self.pi)
        if msgs:
            raise InvalidInputError("; ".join(msgs))
        pi = np.asarray(self.pi, dtype=float).copy()
        wtds = tuple(self.wtds)
        if len(wtds) != pi.shape[0]:
            raise InvalidInputError(f"need {pi.shape[0]} waiting-time distributions, got {len(wtds)}")
        if not all(isinstance(w, PhaseTypeWTD) for w in wtds):
            raise InvalidInputError("waiting-time distributions must be PhaseTypeWTD instances")
        pi.setflags(write=False)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "wtds", wtds)

    @property
    def n(self) -> int:
        return self.pi.shape[0]

    @classmethod
    def uniform(cls, pi, wtd: PhaseTypeWTD) -> "ClassicalSemiMarkov":
        pi = np.asarray(pi, dtype=float)
        return cls(pi, (wtd,) * pi.shape[0])


def _check_p0(c: ClassicalSemiMarkov, p0) -> np.ndarray:
    p0 = np.asarray(p0, dtype=float)
    if p0.shape != (c.n,):
        raise InvalidInputError(f"P0 has shape {p0.shape}, expected ({c.n},)")
    if np.any(p0 < 0) or abs(p0.sum() - 1.0) > 1e-12:
        raise InvalidInputError("P0 must be a probability vector")
    return p0


def laplace_probabilities(c: ClassicalSemiMarkov, p0, u) -> np.ndarray:
    u = np.atleast_1d(np.asarray(u, dtype=complex))
    fh = np.stack([w.laplace(u) for w in c.wtds], axis=-1)
    gh = np.stack([w.survival_laplace(u) for w in c.wtds], axis=-1)
    lhs = np.eye(c.n) - c.pi[None] * fh[:, None, :]
    q = np.linalg.solve(lhs, np.broadcast_to(np.asarray(p0, dtype=complex), (u.size, c.n))[..., None])[..., 0]
    return gh * q


def extended_generator(c: ClassicalSemiMarkov) -> tuple[np.ndarray, np.ndarray]:
    """Row-vector generator on (site, stage) pairs and the site index of each pair."""
    offs = np.cumsum([0] + [w.n_stages for w in c.wtds])
    q = np.zeros((offs[-1], offs[-1]))
    for m, wm in enumerate(c.wtds):
        sm = slice(offs[m], offs[m + 1])
        q[sm, sm] += wm.S
        for n, wn in enumerate(c.wtds):
            if c.pi[n, m] > 0:
                q[sm, offs[n]:offs[n + 1]] += c.pi[n, m] * np.outer(wm.exit_rates, wn.alpha)
    site = np.repeat(np.arange(c.n), [w.n_stages for w in c.wtds])
    return q, site


def extended_chain_solve(c: ClassicalSemiMarkov, p0, grid) -> np.ndarray:
    """Exact one-point probabilities from the (site, stage) Markov chain."""
    p0 = _check_p0(c, p0)
    grid = _check_grid(grid)
    q, site = extended_generator(c)
    start = np.concatenate([p * w.alpha for p, w in zip(p0, c.wtds)])
    out = np.zeros((grid.size, c.n))
    for i, t in enumerate(grid):
        np.add.at(out[i], site, start @ scipy.linalg.expm(t * q))
    return out


def classical_gme_solve(c: ClassicalSemiMarkov, p0, grid, n_nodes: int = talbot.DEFAULT_NODES) -> np.ndarray:
    """``P_n(t)`` on the grid by Talbot inversion of the Laplace-domain solution."""
    p0 = _check_p0(c, p0)
    grid = _check_grid(grid)
    out = np.zeros((grid.size, c.n))
    pos = grid > 0
    out[~pos] = p0
    if pos.any():
        poles = np.linalg.eigvals(extended_generator(c)[0])
        vals = talbot.invert_many(lambda u: laplace_probabilities(c, p0, u), grid[pos], n_nodes, poles=poles)
        out[pos] = vals.real
    return out


def classical_mc(c: ClassicalSemiMarkov, p0, grid, n_traj: int, seed: int = 0,
                 block_size: int = 4096) -> tuple[np.ndarray, np.ndarray]:
    """Event-driven simulation; returns ``(mean, stderr)`` of site occupations, each ``(N, n)``.

    Block ``b`` uses ``SeedSequence(seed, spawn_key=(b,))`` and blocks are reduced in order.
    """
    p0 = _check_p0(c, p0)
    grid = _check_grid(grid)
    if int(n_traj) != n_traj or n_traj < 1:
        raise InvalidInputError(f"n_traj must be a positive integer, got {n_traj}")
    n_traj = int(n_traj)
    cum_pi = np.cumsum(c.pi, axis=0)
    cum_pi[-1] = 1.0
    counts = np.zeros((grid.size, c.n))
    for b, start in enumerate(range(0, n_traj, block_size)):
        size = min(block_size, n_traj - start)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(b,)))
        site = rng.choice(c.n, size=size, p=p0)
        clock = np.zeros(size)
        gi = np.zeros(size, dtype=int)
        active = np.arange(size)
        diff = np.zeros((grid.size + 1, c.n))
        while active.size:
            tau = np.empty(active.size)
            for m, w in enumerate(c.wtds):
                sel = site[active] == m
                if sel.any():
                    tau[sel] = w.sample(int(sel.sum()), rng)
            leave = clock[active] + tau
            # the current site is occupied at grid times in [clock, leave)
            g1 = np.searchsorted(grid, leave, side="left")
            np.add.at(diff, (gi[active], site[active]), 1)
            np.add.at(diff, (g1, site[active]), -1)
            gi[active] = g1
            clock[active] = leave
            u = rng.random(active.size)
            site[active] = (u[:, None] >= cum_pi.T[site[active]]).sum(axis=1)
            active = active[gi[active] < grid.size]
        counts += np.cumsum(diff, axis=0)[:-1]
    mean = counts / n_traj
    se = np.sqrt(np.clip(mean * (1 - mean), 0, None) / max(n_traj - 1, 1))
    return mean, se


def classical_embedding(c: ClassicalSemiMarkov) -> SemiMarkovModel:
    """Diagonal quantum model with jump Kraus operators ``sqrt(pi_nm) |n><m|`` and no free evolution."""
    w0 = c.wtds[0]
    if not all(w0.same_as(w) for w in c.wtds[1:]):
        raise UnsupportedEmbeddingError("the quantum model carries a single waiting-time distribution; "
                                        "site-dependent distributions cannot be embedded")
    kraus = []
    for n in range(c.n):
        for m in range(c.n):
            if c.pi[n, m] > 0:
                k = np.zeros((c.n, c.n), dtype=complex)
                k[n, m] = np.sqrt(c.pi[n, m])
                kraus.append(k)
    return SemiMarkovModel(QuantumMap.from_kraus(kraus), GKSLModel.trivial(c.n), w0)
