"""Phase-type waiting-time distributions.

A distribution is the absorption time of a finite Markov chain with initial
stage probabilities ``alpha`` and sub-generator ``S``:

    f(t) = alpha exp(S t) s,   g(t) = alpha exp(S t) 1,   s = -S 1,
    f^(u) = alpha (u - S)^-1 s,  g^(u) = alpha (u - S)^-1 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ..errors import InvalidInputError


@dataclass(frozen=True, eq=False)
class PhaseTypeWTD:
    alpha: np.ndarray
    S: np.ndarray

    def __post_init__(self):
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float)).copy()
        S = np.atleast_2d(np.asarray(self.S, dtype=float)).copy()
        m = alpha.size
        if S.shape != (m, m):
            raise InvalidInputError(f"S has shape {S.shape}, expected ({m}, {m})")
        if np.any(alpha < -1e-15) or abs(alpha.sum() - 1.0) > 1e-12:
            raise InvalidInputError("alpha must be a probability vector")
        off = S - np.diag(np.diag(S))
        if np.any(off < 0):
            raise InvalidInputError("off-diagonal entries of S must be nonnegative")
        if np.any(np.diag(S) >= 0):
            raise InvalidInputError("diagonal entries of S must be negative (positive stage rates)")
        if np.any(S.sum(axis=1) > 1e-12):
            raise InvalidInputError("row sums of S must be nonpositive")
        if np.max(np.linalg.eigvals(S).real) >= 0:
            raise InvalidInputError("S must be nonsingular (absorption must be certain)")
        alpha = np.clip(alpha, 0.0, None)
        alpha.setflags(write=False)
        S.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "S", S)

    @property
    def n_stages(self) -> int:
        return self.alpha.size

    @property
    def exit_rates(self) -> np.ndarray:
        return -self.S.sum(axis=1)

    @property
    def f0(self) -> float:
        """Density at zero, ``alpha . s``."""
        return float(self.alpha @ self.exit_rates)

    @property
    def mean(self) -> float:
        return float(self.alpha @ np.linalg.solve(-self.S, np.ones(self.n_stages)))

    def _propagate(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        mats = scipy.linalg.expm(t.reshape(-1, 1, 1) * self.S)
        return (self.alpha @ mats).reshape(*t.shape, self.n_stages)

    def pdf(self, t):
        return self._propagate(t) @ self.exit_rates

    def survival(self, t):
        return self._propagate(t).sum(axis=-1)

    def cdf(self, t):
        return 1.0 - self.survival(t)

    def _resolvent(self, u, rhs: np.ndarray):
        u = np.asarray(u, dtype=complex)
        m = self.n_stages
        a = u.reshape(-1, 1, 1) * np.eye(m) - self.S
        x = np.linalg.solve(a, np.broadcast_to(rhs, (a.shape[0], m))[..., None])[..., 0]
        return (x @ self.alpha).reshape(u.shape)

    def laplace(self, u):
        """``f^(u)`` for complex ``u`` (scalar or array)."""
        return self._resolvent(u, self.exit_rates)

    def survival_laplace(self, u):
        return self._resolvent(u, np.ones(self.n_stages))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Exact draws by simulating the stage chain to absorption."""
        m = self.n_stages
        rates = -np.diag(self.S)
        jump = np.zeros((m, m + 1))
        jump[:, :m] = self.S / rates[:, None]
        jump[np.arange(m), np.arange(m)] = 0.0
        jump[:, m] = self.exit_rates / rates
        cum = np.cumsum(jump, axis=1)
        cum[:, -1] = 1.0
        stage = rng.choice(m, size=n, p=self.alpha) if m > 1 else np.zeros(n, dtype=int)
        out = np.zeros(n)
        active = np.arange(n)
        while active.size:
            st = stage[active]
            out[active] += rng.exponential(1.0 / rates[st])
            if m == 1 and jump[0, 1] == 1.0:
                break
            nxt = (rng.random(active.size)[:, None] >= cum[st]).sum(axis=1)
            done = nxt >= m
            stage[active[~done]] = nxt[~done]
            active = active[~done]
        return out

    def to_json(self) -> dict:
        return {"alpha": self.alpha.tolist(), "S": self.S.tolist()}

    @classmethod
    def from_json(cls, obj) -> "PhaseTypeWTD":
        return cls(np.asarray(obj["alpha"], dtype=float), np.asarray(obj["S"], dtype=float))

    def same_as(self, other: "PhaseTypeWTD", atol: float = 1e-12) -> bool:
        return (self.alpha.shape == other.alpha.shape and np.allclose(self.alpha, other.alpha, rtol=0, atol=atol)
                and np.allclose(self.S, other.S, rtol=0, atol=atol))


def _positive(name: str, x: float) -> float:
    x = float(x)
    if not np.isfinite(x) or x <= 0:
        raise InvalidInputError(f"{name} must be positive, got {x}")
    return x


def exponential(rate: float) -> PhaseTypeWTD:
    rate = _positive("rate", rate)
    return PhaseTypeWTD(np.array([1.0]), np.array([[-rate]]))


def erlang(k: int, rate: float) -> PhaseTypeWTD:
    rate = _positive("rate", rate)
    if int(k) != k or k < 1:
        raise InvalidInputError(f"Erlang shape must be a positive integer, got {k}")
    k = int(k)
    S = -rate * np.eye(k) + rate * np.eye(k, k=1)
    alpha = np.zeros(k)
    alpha[0] = 1.0
    return PhaseTypeWTD(alpha, S)


def hyperexponential(weights, rates) -> PhaseTypeWTD:
    w = np.asarray(weights, dtype=float)
    r = np.array([_positive("rate", x) for x in rates])
    if w.shape != r.shape or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise InvalidInputError("weights must be a probability vector matching the rates")
    return PhaseTypeWTD(w, -np.diag(r))


def convolution(a: PhaseTypeWTD, b: PhaseTypeWTD) -> PhaseTypeWTD:
    """Distribution of the sum of independent draws from ``a`` and ``b``."""
    ma, mb = a.n_stages, b.n_stages
    S = np.zeros((ma + mb, ma + mb))
    S[:ma, :ma] = a.S
    S[:ma, ma:] = np.outer(a.exit_rates, b.alpha)
    S[ma:, ma:] = b.S
    return PhaseTypeWTD(np.concatenate([a.alpha, np.zeros(mb)]), S)


def mixture(w: float, a: PhaseTypeWTD, b: PhaseTypeWTD) -> PhaseTypeWTD:
    """Draw from ``a`` with probability ``w``, else from ``b``."""
    w = float(w)
    if not 0.0 <= w <= 1.0:
        raise InvalidInputError(f"mixture weight must lie in [0, 1], got {w}")
    return PhaseTypeWTD(np.concatenate([w * a.alpha, (1 - w) * b.alpha]), scipy.linalg.block_diag(a.S, b.S))


def renewal_count_probs(wtd: PhaseTypeWTD, t: float, k_max: int) -> np.ndarray:
    """``P(N_t = k)`` for ``k = 0..k_max``, ``N_t`` the number of renewals in ``[0, t]``.

    Uses the level-expanded chain whose level counts completed waiting times.
    """
    m = wtd.n_stages
    n = (k_max + 1) * m
    q = np.zeros((n, n))
    for k in range(k_max + 1):
        q[k * m:(k + 1) * m, k * m:(k + 1) * m] = wtd.S
        if k < k_max:
            q[k * m:(k + 1) * m, (k + 1) * m:(k + 2) * m] = np.outer(wtd.exit_rates, wtd.alpha)
    p0 = np.zeros(n)
    p0[:m] = wtd.alpha
    pt = p0 @ scipy.linalg.expm(t * q)
    return pt.reshape(k_max + 1, m).sum(axis=1)
