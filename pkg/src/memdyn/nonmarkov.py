"""Memory-effect witnesses for tabulated dynamics: revival measures and divisibility.

A :class:`DynamicsFamily` stores superoperators ``Phi(t_i, 0)`` on a time grid.
The trace-distance (BLP) and Helstrom measures sum the positive increments of
``||Phi(t_i)[p1 rho1 - p2 rho2]||_1`` along the grid and maximize over initial
pairs (and weights). The maximization is a deterministic seed set plus
coordinate ascent, so reported values are lower bounds on the true supremum.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import InvalidInputError, NonInvertibleError
from .qcore import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    DensityMatrix,
    QuantumMap,
    as_square,
    choi_eigvals,
    superop_to_choi,
    trace_norm_batch,
    vec,
)


@dataclass(frozen=True, eq=False)
class DynamicsFamily:
    """Dynamical maps ``Phi(t_i, 0)`` on a strictly increasing grid starting at 0."""

    dim: int
    grid: np.ndarray
    maps: np.ndarray
    cp_tol: float = 1e-8
    validate: bool = True

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float).copy()
        maps = np.asarray(self.maps, dtype=complex).copy()
        d2 = self.dim * self.dim
        if grid.ndim != 1 or grid.size == 0:
            raise InvalidInputError("grid must be a non-empty 1-d array")
        if grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
            raise InvalidInputError("grid must start at 0 and be strictly increasing")
        if maps.shape != (grid.size, d2, d2):
            raise InvalidInputError(f"maps have shape {maps.shape}, expected {(grid.size, d2, d2)}")
        if self.validate:
            if np.abs(maps[0] - np.eye(d2)).max() > 1e-10:
                raise InvalidInputError("Phi(t_0, 0) must be the identity map")
            for i, s in enumerate(maps):
                lo = float(choi_eigvals(superop_to_choi(s, self.dim, self.dim))[0])
                if lo < -self.cp_tol:
                    raise InvalidInputError(f"map at grid index {i} is not CP (min Choi eigenvalue {lo:.3e})")
                tr_row = vec(np.eye(self.dim)) @ s
                if np.abs(tr_row - vec(np.eye(self.dim))).max() > self.cp_tol:
                    raise InvalidInputError(f"map at grid index {i} is not trace preserving")
        grid.setflags(write=False)
        maps.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "maps", maps)

    @classmethod
    def from_semigroup(cls, model, grid) -> "DynamicsFamily":
        from .gksl import semigroup_propagators

        grid = np.asarray(grid, dtype=float)
        return cls(model.dim, grid, semigroup_propagators(model, grid))

    @classmethod
    def from_callable(cls, dim: int, grid, propagator, **kw) -> "DynamicsFamily":
        """Tabulate ``propagator(t) -> superoperator`` on the grid."""
        grid = np.asarray(grid, dtype=float)
        return cls(dim, grid, np.stack([np.asarray(propagator(t)) for t in grid]), **kw)

    def conjugated(self, u) -> "DynamicsFamily":
        """Family followed by the fixed unitary conjugation ``rho -> U rho U^dag``."""
        u = np.asarray(u, dtype=complex)
        su = np.kron(u.conj(), u)
        return DynamicsFamily(self.dim, self.grid, su @ self.maps, self.cp_tol, validate=False)

    def apply(self, rho) -> np.ndarray:
        """States ``Phi(t_i)[rho]`` for all grid points, shape ``(N, d, d)``."""
        return _unvec_stack(self.maps @ vec(as_square(rho)))


def _unvec_stack(v: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(v.shape[-1])))
    return np.swapaxes(v.reshape(*v.shape[:-1], d, d), -1, -2)


def _norm_series(maps: np.ndarray, ops: np.ndarray) -> np.ndarray:
    x = np.asarray(ops, dtype=complex)
    xv = np.swapaxes(x, -1, -2).reshape(x.shape[0], -1)
    return trace_norm_batch(_unvec_stack(np.einsum("nab,mb->nma", maps, xv)))


def helstrom_series(f: DynamicsFamily, helstrom_ops: np.ndarray) -> np.ndarray:
    """``||Phi(t_i)[X_m]||_1`` for a stack of Hermitian ``X_m``; returns shape ``(N, M)``."""
    return _norm_series(f.maps, helstrom_ops)


def distinguishability_trajectory(f: DynamicsFamily, rho1, rho2, p1: float = 0.5, p2: float = 0.5) -> np.ndarray:
    """Helstrom norms ``||p1 Phi(t_i)[rho1] - p2 Phi(t_i)[rho2]||_1`` along the grid.

    With ``p1 = p2 = 1/2`` this is the trace distance of the evolved pair.
    """
    if p1 < 0 or p2 < 0 or abs(p1 + p2 - 1.0) > 1e-12:
        raise InvalidInputError(f"weights must be nonnegative and sum to 1, got ({p1}, {p2})")
    r1, r2 = as_square(rho1, "rho1"), as_square(rho2, "rho2")
    if r1.shape != (f.dim, f.dim) or r2.shape != (f.dim, f.dim):
        raise InvalidInputError("state dimension does not match the family")
    return helstrom_series(f, (p1 * r1 - p2 * r2)[None])[:, 0]


def positive_increments(series: np.ndarray, floor: float = 0.0) -> np.ndarray:
    """Sum over the grid of increments exceeding ``floor``; works along axis 0."""
    inc = np.diff(series, axis=0)
    return np.where(inc > floor, inc, 0.0).sum(axis=0)


def revival_intervals(grid: np.ndarray, series: np.ndarray, floor: float = 0.0) -> list[tuple[float, float]]:
    inc = np.diff(series)
    up = inc > floor
    out = []
    i = 0
    while i < up.size:
        if up[i]:
            j = i
            while j + 1 < up.size and up[j + 1]:
                j += 1
            out.append((float(grid[i]), float(grid[j + 1])))
            i = j + 1
        else:
            i += 1
    return out


# ---------------------------------------------------------------------------
# measure optimization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OptConfig:
    """Search settings for the pair/weight maximization.

    ``increment_floor`` discards grid increments at round-off level so that a
    contractive family scores exactly zero.
    """

    n_theta: int = 7
    n_phi: int = 12
    n_random: int = 24
    n_weights: int = 21
    n_starts: int = 3
    step0: float = 0.25
    min_step: float = 1e-4
    max_iter: int = 400
    increment_floor: float = 1e-12
    seed: int = 0


@dataclass
class MeasureResult:
    value: float
    argmax_pair: tuple
    weights: tuple[float, float]
    revival_intervals: list
    trajectory: np.ndarray = field(repr=False)
    grid: np.ndarray = field(repr=False)


def bloch_state(n) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    return 0.5 * (np.eye(2) + n[0] * SIGMA_X + n[1] * SIGMA_Y + n[2] * SIGMA_Z)


def _antipodal_seeds(n_theta: int, n_phi: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pure antipodal qubit pairs on a hemisphere grid, poles included."""
    pairs = []
    for theta in np.linspace(0.0, np.pi / 2, n_theta):
        phis = [0.0] if theta == 0.0 else np.linspace(0.0, 2 * np.pi, n_phi, endpoint=False)
        for phi in phis:
            n = np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
            pairs.append((bloch_state(n), bloch_state(-n)))
    return pairs


def _random_pure(dim: int, rng: np.random.Generator) -> np.ndarray:
    psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    psi /= np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def _seed_pairs(dim: int, cfg: OptConfig) -> list[tuple[np.ndarray, np.ndarray]]:
    rng = np.random.default_rng(cfg.seed)
    pairs = []
    if dim == 2:
        pairs.extend(_antipodal_seeds(cfg.n_theta, cfg.n_phi))
    else:
        eye = np.eye(dim)
        for a in range(dim):
            for b in range(a + 1, dim):
                pairs.append((np.outer(eye[a], eye[a]).astype(complex), np.outer(eye[b], eye[b]).astype(complex)))
    for _ in range(cfg.n_random):
        pairs.append((_random_pure(dim, rng), _random_pure(dim, rng)))
    return pairs


def _states_from_params(a: np.ndarray, dim: int) -> np.ndarray:
    """Map real parameter blocks of length ``2 d^2`` to states ``A A^dag / Tr``."""
    k = a.shape[0]
    m = (a[:, : dim * dim] + 1j * a[:, dim * dim:]).reshape(k, dim, dim)
    rho = m @ np.conj(np.swapaxes(m, -1, -2))
    return rho / np.trace(rho, axis1=-2, axis2=-1).real[:, None, None]


def _params_from_state(rho: np.ndarray) -> np.ndarray:
    """Square-root factor of a state flattened to real parameters."""
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    a = v * np.sqrt(np.clip(w, 0.0, None))
    return np.concatenate([a.real.ravel(), a.imag.ravel()])


def _coordinate_ascent(objective, x0: np.ndarray, step0: float, min_step: float, max_iter: int,
                       lower=None, upper=None) -> tuple[np.ndarray, float]:
    """Batch coordinate search: probe ``x +- step e_c`` for every c, move to the best improvement."""
    x = np.array(x0, dtype=float)
    best = float(objective(x[None])[0])
    step = step0
    n = x.size
    for _ in range(max_iter):
        if step < min_step:
            break
        trials = np.repeat(x[None], 2 * n, axis=0)
        idx = np.arange(n)
        trials[idx, idx] += step
        trials[n + idx, idx] -= step
        if lower is not None:
            trials = np.clip(trials, lower, upper)
        vals = objective(trials)
        k = int(np.argmax(vals))
        if vals[k] > best + 1e-15:
            best = float(vals[k])
            x = trials[k]
        else:
            step *= 0.5
    return x, best


class _MeasureProblem:
    def __init__(self, f: DynamicsFamily, floor: float):
        self.f = f
        self.floor = floor
        self.d = f.dim
        self.block = 2 * self.d * self.d

    def score_ops(self, x_ops: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        series = helstrom_series(self.f, x_ops)
        return positive_increments(series, self.floor), series

    def score_params(self, params: np.ndarray, fixed_p: float | None) -> np.ndarray:
        b = self.block
        if fixed_p is None:
            p = np.clip(params[:, 0], 0.0, 1.0)
            rest = params[:, 1:]
        else:
            p = np.full(params.shape[0], fixed_p)
            rest = params
        r1 = _states_from_params(rest[:, :b], self.d)
        r2 = _states_from_params(rest[:, b:], self.d)
        ops = p[:, None, None] * r1 - (1 - p)[:, None, None] * r2
        return self.score_ops(ops)[0]


def _finish(prob: _MeasureProblem, rho1, rho2, p: float) -> MeasureResult:
    series = helstrom_series(prob.f, (p * rho1 - (1 - p) * rho2)[None])[:, 0]
    value = float(positive_increments(series, prob.floor))
    intervals = revival_intervals(prob.f.grid, series, prob.floor)
    pair = (DensityMatrix(0.5 * (rho1 + rho1.conj().T), psd_tol=1e-8, trace_tol=1e-10),
            DensityMatrix(0.5 * (rho2 + rho2.conj().T), psd_tol=1e-8, trace_tol=1e-10))
    return MeasureResult(value, pair, (p, 1 - p), intervals, series, prob.f.grid)


def _optimize(f: DynamicsFamily, cfg: OptConfig, weights: np.ndarray, extra: list | None = None) -> MeasureResult:
    if f.grid.size < 2:
        raise InvalidInputError("measure needs a grid with at least two points")
    prob = _MeasureProblem(f, cfg.increment_floor)
    pairs = _seed_pairs(f.dim, cfg)
    cands = []  # (score, p, rho1, rho2), enumeration order fixes ties
    r1s = np.stack([a for a, _ in pairs])
    r2s = np.stack([b for _, b in pairs])
    for p in weights:
        scores, _ = prob.score_ops(p * r1s - (1 - p) * r2s)
        for k, sc in enumerate(scores):
            cands.append((float(sc), float(p), r1s[k], r2s[k]))
    for sc_p, r1, r2 in extra or []:
        sc, _ = prob.score_ops((sc_p * r1 - (1 - sc_p) * r2)[None])
        cands.append((float(sc[0]), float(sc_p), r1, r2))
    order = sorted(range(len(cands)), key=lambda k: -cands[k][0])
    best = cands[order[0]]
    free_p = len(weights) > 1

    if best[0] > 0.0 and free_p:
        # refine the weight on a finer grid around the best cell
        h = 1.0 / max(len(weights) - 1, 1)
        fine = np.clip(np.linspace(best[1] - h, best[1] + h, 21), 0.0, 1.0)
        scores, _ = prob.score_ops(fine[:, None, None] * best[2] - (1 - fine)[:, None, None] * best[3])
        k = int(np.argmax(scores))
        if scores[k] > best[0]:
            best = (float(scores[k]), float(fine[k]), best[2], best[3])
            cands.append(best)
            order.insert(0, len(cands) - 1)
    if best[0] > 0.0:
        seen = 0
        for k in order:
            if seen >= cfg.n_starts:
                break
            sc, p, r1, r2 = cands[k]
            if sc <= 0.0:
                break
            seen += 1
            x0 = np.concatenate(([np.array([p])] if free_p else []) + [_params_from_state(r1), _params_from_state(r2)])
            lower = upper = None
            if free_p:
                lower = np.full(x0.size, -np.inf)
                upper = np.full(x0.size, np.inf)
                lower[0], upper[0] = 0.0, 1.0
            x, val = _coordinate_ascent(
                lambda z: prob.score_params(z, None if free_p else float(weights[0])),
                x0, cfg.step0, cfg.min_step, cfg.max_iter, lower, upper)
            if val > best[0]:
                pr = float(np.clip(x[0], 0.0, 1.0)) if free_p else float(weights[0])
                rest = x[1:] if free_p else x
                b = prob.block
                rr1 = _states_from_params(rest[None, :b], f.dim)[0]
                rr2 = _states_from_params(rest[None, b:], f.dim)[0]
                best = (val, pr, rr1, rr2)
    return _finish(prob, best[2], best[3], best[1])


def blp_measure(f: DynamicsFamily, cfg: OptConfig | None = None) -> MeasureResult:
    """Trace-distance revival measure, weights fixed at (1/2, 1/2)."""
    cfg = cfg or OptConfig()
    return _optimize(f, cfg, np.array([0.5]))


def helstrom_measure(f: DynamicsFamily, cfg: OptConfig | None = None) -> MeasureResult:
    """Helstrom-norm revival measure, maximized over pairs and prior weights.

    The trace-distance optimum is included as a candidate, so the result is never
    below :func:`blp_measure` for the same configuration.
    """
    cfg = cfg or OptConfig()
    blp = blp_measure(f, cfg)
    weights = np.linspace(0.0, 1.0, cfg.n_weights)
    extra = [(0.5, blp.argmax_pair[0].data, blp.argmax_pair[1].data)]
    res = _optimize(f, cfg, weights, extra)
    if res.value < blp.value:
        return MeasureResult(blp.value, blp.argmax_pair, (0.5, 0.5), blp.revival_intervals, blp.trajectory, blp.grid)
    return res


# ---------------------------------------------------------------------------
# divisibility
# ---------------------------------------------------------------------------

COND_MAX = 1e8


@dataclass(frozen=True)
class IntermediateReport:
    i: int
    j: int
    cond: float
    composition_defect: float


def _inverse(f: DynamicsFamily, i: int, cond_max: float) -> np.ndarray:
    s = f.maps[i]
    cond = float(np.linalg.cond(s))
    if not np.isfinite(cond) or cond > cond_max:
        raise NonInvertibleError(cond, i)
    return np.linalg.inv(s)


def intermediate_map(f: DynamicsFamily, i: int, j: int, cond_max: float = COND_MAX) -> tuple[QuantumMap, IntermediateReport]:
    """``Phi(t_j, t_i) = Phi(t_j, 0) Phi(t_i, 0)^-1`` with its conditioning report."""
    n = f.grid.size
    if not (0 <= i <= j < n):
        raise InvalidInputError(f"need 0 <= i <= j < {n}, got i={i}, j={j}")
    if i == j:
        s = np.eye(f.dim * f.dim, dtype=complex)
        return QuantumMap.from_superop(s), IntermediateReport(i, j, 1.0, 0.0)
    if i == 0:
        return QuantumMap.from_superop(f.maps[j].copy()), IntermediateReport(i, j, 1.0, 0.0)
    inv = _inverse(f, i, cond_max)
    s = f.maps[j] @ inv
    defect = float(np.abs(s @ f.maps[i] - f.maps[j]).max())
    return QuantumMap.from_superop(s), IntermediateReport(i, j, float(np.linalg.cond(f.maps[i])), defect)


def consecutive_maps(f: DynamicsFamily, cond_max: float = COND_MAX) -> np.ndarray:
    """Stack of ``Phi(t_{i+1}, t_i)`` for every grid step."""
    out = [f.maps[1]] if f.grid.size > 1 else []
    for i in range(1, f.grid.size - 1):
        out.append(f.maps[i + 1] @ _inverse(f, i, cond_max))
    d2 = f.dim * f.dim
    return np.stack(out) if out else np.zeros((0, d2, d2), dtype=complex)


@dataclass(frozen=True)
class CPDivisibilityReport:
    divisible: bool
    worst: tuple[int, int, float]
    step_min_eigs: np.ndarray = field(repr=False)


def check_cp_divisible(f: DynamicsFamily, tol: float = 1e-9, cond_max: float = COND_MAX) -> CPDivisibilityReport:
    steps = consecutive_maps(f, cond_max)
    eigs = np.array([float(choi_eigvals(superop_to_choi(s, f.dim, f.dim))[0]) for s in steps])
    if eigs.size == 0:
        return CPDivisibilityReport(True, (0, 0, 0.0), eigs)
    k = int(np.argmin(eigs))
    return CPDivisibilityReport(bool(eigs[k] >= -tol), (k, k + 1, float(eigs[k])), eigs)


def _min_eig_batch(x: np.ndarray) -> np.ndarray:
    if x.shape[-1] == 2:
        a = x[..., 0, 0].real
        d = x[..., 1, 1].real
        rad = np.sqrt(0.25 * (a - d) ** 2 + np.abs(x[..., 0, 1]) ** 2)
        return 0.5 * (a + d) - rad
    return np.linalg.eigvalsh(0.5 * (x + np.conj(np.swapaxes(x, -1, -2))))[..., 0]


def _qubit_pure(theta, phi) -> np.ndarray:
    psi = np.stack([np.cos(theta / 2) + 0j, np.exp(1j * phi) * np.sin(theta / 2)], axis=-1)
    return psi[..., :, None] * psi[..., None, :].conj()


def _pure_from_vector(x: np.ndarray, dim: int) -> np.ndarray:
    psi = x[..., :dim] + 1j * x[..., dim:]
    psi = psi / np.linalg.norm(psi, axis=-1, keepdims=True)
    return psi[..., :, None] * psi[..., None, :].conj()


def _output_min_eigs(steps: np.ndarray, states: np.ndarray) -> np.ndarray:
    """Minimum output eigenvalue of every step map on every input, shape ``(n_steps, n_states)``."""
    sv = np.swapaxes(states, -1, -2).reshape(states.shape[0], -1)
    out = np.einsum("nab,mb->nma", steps, sv)
    return _min_eig_batch(_unvec_stack(out))


@dataclass(frozen=True)
class PDivisibilityReport:
    divisible: bool
    worst: tuple[int, float]
    certificate: str
    step_min_eigs: np.ndarray = field(repr=False)
    helstrom_monotone: bool
    helstrom_worst: tuple[int, float]
    step_max_increments: np.ndarray = field(repr=False)

    @property
    def consistent(self) -> bool:
        """Positivity verdict matches the Helstrom-norm monotonicity verdict."""
        return self.divisible == self.helstrom_monotone


def _positivity_minima(steps: np.ndarray, dim: int, n_samples: int,
                       rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, str]:
    """Per step: smallest output eigenvalue found, the pure input reaching it, and the certificate kind."""
    if dim == 2:
        th, ph = np.meshgrid(np.linspace(0, np.pi, 25), np.linspace(0, 2 * np.pi, 48, endpoint=False), indexing="ij")
        th, ph = th.ravel(), ph.ravel()
        grid_states = _qubit_pure(th, ph)
        vals = _output_min_eigs(steps, grid_states)
        mins = vals.min(axis=1)
        args = grid_states[np.argmin(vals, axis=1)]
        for n, s in enumerate(steps):
            k = int(np.argmin(vals[n]))
            res = minimize(lambda z: _output_min_eigs(s[None], _qubit_pure(z[0], z[1])[None])[0, 0],
                           np.array([th[k], ph[k]]), method="Nelder-Mead",
                           options={"xatol": 1e-9, "fatol": 1e-14, "maxiter": 400})
            if res.fun < mins[n]:
                mins[n], args[n] = float(res.fun), _qubit_pure(res.x[0], res.x[1])
        return mins, args, "bloch-sphere grid with local refinement"
    x = rng.standard_normal((n_samples, 2 * dim))
    sample_states = _pure_from_vector(x, dim)
    vals = _output_min_eigs(steps, sample_states)
    mins = vals.min(axis=1)
    args = sample_states[np.argmin(vals, axis=1)]
    for n, s in enumerate(steps):
        k = int(np.argmin(vals[n]))
        z, val = _coordinate_ascent(lambda z: -_output_min_eigs(s[None], _pure_from_vector(z, dim))[0],
                                    x[k], 0.2, 1e-5, 300)
        if -val < mins[n]:
            mins[n], args[n] = -val, _pure_from_vector(z, dim)
    return mins, args, f"probabilistic: {n_samples} random pure states with local refinement"


def _witness_increments(f: DynamicsFamily, witnesses: np.ndarray, steps_idx, cond_max: float) -> np.ndarray:
    """Helstrom growth on step ``n`` of ``X = Phi(t_n)^-1[psi_n]`` scaled to unit trace norm.

    Any unit-trace-norm Hermitian ``X`` is a Helstrom matrix ``p1 rho1 - p2 rho2``.
    When ``psi_n`` is mapped to a non-positive operator by the step map, this ``X``
    is the candidate that Helstrom monotonicity must catch. The growth is
    evaluated on the forward maps ``Phi(t_n)``, ``Phi(t_n+1)`` only.
    """
    out = np.full(len(witnesses), -np.inf)
    d = f.dim
    for n in steps_idx:
        inv = np.eye(d * d) if n == 0 else _inverse(f, n, cond_max)
        x = _unvec_stack(inv @ vec(witnesses[n]))
        x = 0.5 * (x + x.conj().T)
        x = x / trace_norm_batch(x[None])[0]
        s = _norm_series(f.maps[n:n + 2], x[None])[:, 0]
        out[n] = s[1] - s[0]
    return out


def _helstrom_step_maxima(f: DynamicsFamily, n_samples: int, rng: np.random.Generator,
                          refine: bool, tol: float) -> np.ndarray:
    """Largest sampled one-step growth of the Helstrom norm over initial pairs and weights."""
    d = f.dim
    b = 2 * d * d
    cfg = OptConfig()
    pairs = _seed_pairs(d, cfg)
    r1 = [a for a, _ in pairs]
    r2 = [c for _, c in pairs]
    for _ in range(n_samples):
        r1.append(_states_from_params(rng.standard_normal((1, b)), d)[0])
        r2.append(_states_from_params(rng.standard_normal((1, b)), d)[0])
    r1, r2 = np.stack(r1), np.stack(r2)
    weights = np.linspace(0.0, 1.0, 11)
    ops = (weights[:, None, None, None] * r1[None] - (1 - weights)[:, None, None, None] * r2[None]).reshape(-1, d, d)
    params = np.array([np.concatenate(([p], _params_from_state(a), _params_from_state(c)))
                       for p in weights for a, c in zip(r1, r2)])
    series = helstrom_series(f, ops)
    inc = np.diff(series, axis=0)
    best = inc.max(axis=1)
    if not refine:
        return best
    lower = np.full(params.shape[1], -np.inf)
    upper = np.full(params.shape[1], np.inf)
    lower[0], upper[0] = 0.0, 1.0
    for n in range(inc.shape[0]):
        if best[n] > tol:
            continue
        pair_maps = f.maps[n:n + 2]

        def objective(z, pair_maps=pair_maps):
            p = np.clip(z[:, 0], 0.0, 1.0)
            x = p[:, None, None] * _states_from_params(z[:, 1:1 + b], d) - \
                (1 - p)[:, None, None] * _states_from_params(z[:, 1 + b:], d)
            s = _norm_series(pair_maps, x)
            return s[1] - s[0]

        k = int(np.argmax(inc[n]))
        _, val = _coordinate_ascent(objective, params[k], 0.2, 1e-4, 80, lower, upper)
        best[n] = max(best[n], val)
    return best


def check_p_divisible(f: DynamicsFamily, tol: float = 1e-9, n_samples: int = 200, seed: int = 0,
                      cond_max: float = COND_MAX, refine_helstrom: bool = True) -> PDivisibilityReport:
    """Positivity of every consecutive intermediate map, cross-checked against Helstrom monotonicity.

    For qubits positivity is certified by minimizing the output eigenvalue over the
    Bloch sphere; for larger dimensions ``n_samples`` random pure inputs give a
    probabilistic certificate.
    """
    rng = np.random.default_rng(seed)
    steps = consecutive_maps(f, cond_max)
    if steps.shape[0] == 0:
        empty = np.zeros(0)
        return PDivisibilityReport(True, (0, 0.0), "trivial", empty, True, (0, 0.0), empty)
    mins, witnesses, cert = _positivity_minima(steps, f.dim, n_samples, rng)
    k = int(np.argmin(mins))
    incs = _helstrom_step_maxima(f, n_samples, rng, refine_helstrom, tol)
    incs = np.maximum(incs, _witness_increments(f, witnesses, np.flatnonzero(mins < -tol), cond_max))
    h = int(np.argmax(incs))
    return PDivisibilityReport(
        divisible=bool(mins[k] >= -tol),
        worst=(k, float(mins[k])),
        certificate=cert,
        step_min_eigs=mins,
        helstrom_monotone=bool(incs[h] <= tol),
        helstrom_worst=(h, float(incs[h])),
        step_max_increments=incs,
    )
