"""Quantum semi-Markov dynamics.

Between jumps the system evolves with ``F(t) = exp(t L_F)``; at jumps the map
``E`` acts; waiting times have a phase-type density ``f`` with survival ``g``.
Two operator orderings are supported:

* ``"micromaser"``: ``rho(t) = sum_k (fF * E)^{*k} * gF rho0``, the survival
  factor sits on the earliest interval, ``rho^ = (1 - fF^ E)^-1 gF^ rho0``;
* ``"collision"``: the survival factor sits on the interval that is still
  running at time ``t``, ``rho^ = gF^ (1 - E fF^)^-1 rho0``.

Laplace objects are rational matrix functions. With stage generator ``S``,
``A = S (x) 1 + 1 (x) L_F`` and ``P = alpha (x) 1``,

    fF^(u) = P (u - A)^-1 (s (x) 1),    gF^(u) = P (u - A)^-1 (1 (x) 1).

Adding the jumps to ``A`` gives a finite Markovian embedding (stage (x) system)
whose matrix exponential is an exact reference solution; its spectrum gives the
poles checked against the Talbot contour.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ..errors import InvalidInputError, NonInvertibleError
from ..gksl import GKSLModel, jump_superoperator, lindblad_superoperator
from ..qcore import QuantumMap, as_square, is_cptp, unvec, vec
from . import talbot
from .phasetype import PhaseTypeWTD, exponential, renewal_count_probs

ORDERINGS = ("micromaser", "collision")
SINGULAR_COND = 1e12
MC_BLOCK = 4096


def _check_ordering(ordering: str):
    if ordering not in ORDERINGS:
        raise InvalidInputError(f"ordering must be one of {ORDERINGS}, got {ordering!r}")


@dataclass(frozen=True, eq=False)
class SemiMarkovModel:
    E: QuantumMap
    F_generator: GKSLModel
    wtd: PhaseTypeWTD
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not isinstance(self.E, QuantumMap):
            object.__setattr__(self, "E", QuantumMap.from_superop(np.asarray(self.E)))
        if self.E.dim_in != self.E.dim_out:
            raise InvalidInputError("jump map must act on a single space")
        if self.E.dim_in != self.F_generator.dim:
            raise InvalidInputError(
                f"jump map acts on dimension {self.E.dim_in}, F generator on {self.F_generator.dim}")
        rep = is_cptp(self.E)
        if not (rep.cp and rep.tp):
            raise InvalidInputError(
                f"jump map is not CPTP (min Choi eigenvalue {rep.min_choi_eig:.3e}, TP defect {rep.tp_defect:.3e})")

    @property
    def dim(self) -> int:
        return self.F_generator.dim

    @property
    def e_super(self) -> np.ndarray:
        return self.E.superop

    @property
    def lf(self) -> np.ndarray:
        if "lf" not in self._cache:
            self._cache["lf"] = lindblad_superoperator(self.F_generator)
        return self._cache["lf"]

    def F(self, t: float) -> np.ndarray:
        return scipy.linalg.expm(t * self.lf)

    @classmethod
    def from_gksl(cls, m: GKSLModel, tol: float = 1e-10) -> "SemiMarkovModel":
        """Semi-Markov form of a semigroup whose total jump rate is state independent.

        Requires ``sum_k gamma_k L_k^dag L_k = lam 1``. Then the no-jump evolution is
        ``exp(-lam t)`` times the unitary part, so ``f`` is exponential with rate
        ``lam``, ``E = J / lam`` and ``F`` is generated by ``-i[H, .]``.
        """
        d = m.dim
        loss = sum((g * op.conj().T @ op for g, op in m.channels), np.zeros((d, d), dtype=complex))
        lam = float(np.trace(loss).real) / d
        if lam <= 0 or np.abs(loss - lam * np.eye(d)).max() > tol * max(1.0, lam):
            raise InvalidInputError("sum of gamma_k L_k^dag L_k must be a positive multiple of the identity")
        e = QuantumMap.from_superop(jump_superoperator(m) / lam)
        return cls(e, GKSLModel.unitary(m.H), exponential(lam))


def _blocks(model: SemiMarkovModel):
    """Shared building blocks of the rational transfer functions."""
    c = model._cache
    if "blocks" not in c:
        w = model.wtd
        m, d2 = w.n_stages, model.dim ** 2
        eye = np.eye(d2)
        a = np.kron(w.S, eye) + np.kron(np.eye(m), model.lf)
        p = np.kron(w.alpha[None, :], eye)
        q1 = np.kron(np.ones((m, 1)), eye)
        qs = np.kron(w.exit_rates[:, None], eye)
        ap = a - q1 @ (p @ a)
        c["blocks"] = dict(A=a, P=p, Q1=q1, Qs=qs, Ap=ap, PA=p @ a, f0=w.f0, d2=d2)
    return c["blocks"]


def _batched_solve(mat_fn, u, rhs):
    u = np.atleast_1d(np.asarray(u, dtype=complex))
    n = rhs.shape[0]
    lhs = u[:, None, None] * np.eye(n) - mat_fn[None]
    return np.linalg.solve(lhs, np.broadcast_to(rhs, (u.size,) + rhs.shape))


def _check_singular(mat, u):
    for z in np.atleast_1d(u):
        cond = np.linalg.cond(z * np.eye(mat.shape[0]) - mat)
        if not np.isfinite(cond) or cond > SINGULAR_COND:
            raise NonInvertibleError(cond)


def transfer_functions(model: SemiMarkovModel, u) -> tuple[np.ndarray, np.ndarray]:
    """``(fF^(u), gF^(u))`` stacked over the entries of ``u``."""
    b = _blocks(model)
    x = _batched_solve(b["A"], u, np.hstack([b["Qs"], b["Q1"]]))
    y = b["P"] @ x
    return y[..., : b["d2"]], y[..., b["d2"]:]


def laplace_propagator_hat(model: SemiMarkovModel, u, ordering: str = "micromaser") -> np.ndarray:
    _check_ordering(ordering)
    ff, gf = transfer_functions(model, u)
    e = model.e_super
    eye = np.eye(e.shape[0])
    if ordering == "micromaser":
        return np.linalg.solve(eye - ff @ e, gf)
    # gF (1 - E fF)^-1 = ((1 - E fF)^-T gF^T)^T
    return np.swapaxes(np.linalg.solve(np.swapaxes(eye - e @ ff, -1, -2), np.swapaxes(gf, -1, -2)), -1, -2)


def embedded_generator(model: SemiMarkovModel, ordering: str = "micromaser") -> np.ndarray:
    """Generator on stage (x) system space whose exponential reproduces the dynamics exactly."""
    _check_ordering(ordering)
    w = model.wtd
    lf, e = model.lf, model.e_super
    m = w.n_stages
    if ordering == "micromaser":
        return np.kron(w.S, np.eye(lf.shape[0])) + np.kron(np.eye(m), lf) + np.kron(np.outer(w.exit_rates, w.alpha), e)
    return np.kron(w.S.T, np.eye(lf.shape[0])) + np.kron(np.eye(m), lf) + np.kron(np.outer(w.alpha, w.exit_rates), e)


def embedded_propagators(model: SemiMarkovModel, times, ordering: str = "micromaser") -> np.ndarray:
    """Exact propagator superoperators from the Markovian embedding."""
    g = embedded_generator(model, ordering)
    w = model.wtd
    d2 = model.dim ** 2
    eye = np.eye(d2)
    if ordering == "micromaser":
        left, right = np.kron(w.alpha[None, :], eye), np.kron(np.ones((w.n_stages, 1)), eye)
    else:
        left, right = np.kron(np.ones((1, w.n_stages)), eye), np.kron(w.alpha[:, None], eye)
    return np.stack([left @ scipy.linalg.expm(t * g) @ right for t in np.asarray(times, dtype=float)])


def dynamics_poles(model: SemiMarkovModel, ordering: str = "micromaser") -> np.ndarray:
    return np.linalg.eigvals(embedded_generator(model, ordering))


def _check_rho0(model: SemiMarkovModel, rho0) -> np.ndarray:
    r = as_square(rho0, "rho0")
    if r.shape[0] != model.dim:
        raise InvalidInputError(f"rho0 has dimension {r.shape[0]}, expected {model.dim}")
    return r


def _check_grid(grid, uniform: bool = False) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size == 0 or not np.all(np.isfinite(g)):
        raise InvalidInputError("grid must be a nonempty 1-d array of finite times")
    if g[0] < 0 or np.any(np.diff(g) <= 0):
        raise InvalidInputError("grid must be nonnegative and strictly increasing")
    if uniform and g.size > 1:
        h = np.diff(g)
        if g[0] != 0 or np.abs(h - h[0]).max() > 1e-9 * max(1.0, abs(h[0])):
            raise InvalidInputError("grid must be uniform and start at 0")
    return g


def laplace_propagators(model: SemiMarkovModel, grid, ordering: str = "micromaser",
                        n_nodes: int = talbot.DEFAULT_NODES) -> np.ndarray:
    """Propagator superoperators by Talbot inversion; ``t = 0`` returns the identity."""
    grid = _check_grid(grid)
    d2 = model.dim ** 2
    out = np.empty((grid.size, d2, d2), dtype=complex)
    pos = grid > 0
    out[~pos] = np.eye(d2)
    if pos.any():
        out[pos] = talbot.invert_many(lambda u: laplace_propagator_hat(model, u, ordering), grid[pos],
                                      n_nodes, poles=dynamics_poles(model, ordering))
    return out


def laplace_series(model: SemiMarkovModel, rho0, grid, ordering: str = "micromaser",
                   n_nodes: int = talbot.DEFAULT_NODES) -> np.ndarray:
    r = _check_rho0(model, rho0)
    d = model.dim
    props = laplace_propagators(model, grid, ordering, n_nodes)
    return np.stack([unvec(p @ vec(r), (d, d)) for p in props])


def laplace_solution(model: SemiMarkovModel, rho0, t: float, ordering: str = "micromaser",
                     n_nodes: int = talbot.DEFAULT_NODES) -> np.ndarray:
    return laplace_series(model, rho0, [t], ordering, n_nodes)[0]


# ---------------------------------------------------------------- memory kernel

def kernel_local(model: SemiMarkovModel) -> np.ndarray:
    """Instantaneous part ``K0 = f(0) (E - 1) + L_F`` shared by both orderings."""
    f0 = model.wtd.f0
    e = model.e_super
    return f0 * (e - np.eye(e.shape[0])) + model.lf


def memory_kernel(model: SemiMarkovModel, u, ordering: str = "micromaser", part: str = "full",
                  check: bool = True) -> np.ndarray:
    """Laplace-domain memory kernel ``K^(u)`` at scalar or array ``u``.

    ``part="full"`` is ``B E - C`` (micromaser) or ``E B - C`` (collision) with
    ``B = gF^-1 fF`` and ``C = gF^-1 - u``. ``part="regular"`` drops the
    u-independent term ``K0`` (a delta function in time).

    Both pieces come from one realization. With ``A' = (1 - Q1 P) A``,
    ``X = P A (u - A')^-1 Q1`` and ``Y = P A (u - A)^-1 Qs``:
    ``(u gF)^-1 = 1 - X``, ``C = -P A Q1 - P A A' (u - A')^-1 Q1`` and
    ``B = f(0) + Y - f(0) X - X Y``. No explicit matrix inverse of ``gF`` is
    formed, so the cancellation at large ``u`` is exact.
    """
    _check_ordering(ordering)
    if part not in ("full", "regular"):
        raise InvalidInputError(f"part must be 'full' or 'regular', got {part!r}")
    scalar = np.ndim(u) == 0
    b = _blocks(model)
    if check:
        _check_singular(b["A"], u)
        gf = transfer_functions(model, u)[1]
        for g in gf:
            cond = np.linalg.cond(g)
            if not np.isfinite(cond) or cond > SINGULAR_COND:
                raise NonInvertibleError(cond)
        if scalar and np.linalg.cond(u * np.eye(b["Ap"].shape[0]) - b["Ap"]) > 1e8:
            # u sits on a removable singularity of the realization (e.g. u = 0)
            return _memory_kernel_direct(model, u, ordering, part)
    pa, ap, f0 = b["PA"], b["Ap"], b["f0"]
    y = pa @ _batched_solve(b["A"], u, b["Qs"])
    xn = _batched_solve(ap, u, b["Q1"])
    x = pa @ xn
    z = (pa @ ap) @ xn
    breg = y - f0 * x - x @ y
    e = model.e_super
    jump = breg @ e if ordering == "micromaser" else e @ breg
    out = jump + z
    if part == "full":
        out = out + kernel_local(model)
    return out[0] if scalar else out


def _memory_kernel_direct(model: SemiMarkovModel, u: complex, ordering: str, part: str) -> np.ndarray:
    ff, gf = transfer_functions(model, u)
    gi = np.linalg.inv(gf[0])
    e = model.e_super
    b = gi @ ff[0]
    out = (b @ e if ordering == "micromaser" else e @ b) - (gi - u * np.eye(e.shape[0]))
    return out if part == "full" else out - kernel_local(model)


def kernel_regular_at_zero(model: SemiMarkovModel, ordering: str = "micromaser") -> np.ndarray:
    """``lim_{u->inf} u K^_reg(u)``, the regular kernel at ``t = 0``."""
    _check_ordering(ordering)
    b = _blocks(model)
    pa = b["PA"]
    bz = pa @ b["Qs"] - b["f0"] * (pa @ b["Q1"])
    e = model.e_super
    jump = bz @ e if ordering == "micromaser" else e @ bz
    return jump + pa @ b["Ap"] @ b["Q1"]


def kernel_poles(model: SemiMarkovModel) -> np.ndarray:
    b = _blocks(model)
    return np.concatenate([np.linalg.eigvals(b["A"]), np.linalg.eigvals(b["Ap"])])


def kernel_time_samples(model: SemiMarkovModel, grid, ordering: str = "micromaser",
                        n_nodes: int = talbot.DEFAULT_NODES) -> tuple[np.ndarray, np.ndarray]:
    """``(K0, K_reg(t_n))``: local part and regular kernel on the grid by Talbot inversion."""
    grid = _check_grid(grid)
    d2 = model.dim ** 2
    samples = np.empty((grid.size, d2, d2), dtype=complex)
    pos = grid > 0
    samples[~pos] = kernel_regular_at_zero(model, ordering)
    if pos.any():
        samples[pos] = talbot.invert_many(
            lambda u: memory_kernel(model, u, ordering, part="regular", check=False),
            grid[pos], n_nodes, poles=kernel_poles(model))
    return kernel_local(model), samples


# ---------------------------------------------------------------- series

def _conv(kern: np.ndarray, y: np.ndarray, h: float) -> np.ndarray:
    """Trapezoidal ``out[j] = int_0^{t_j} kern(t_j - s) y(s) ds`` on uniform nodes."""
    out = np.zeros_like(y)
    for j in range(1, y.shape[0]):
        wy = y[: j + 1].copy()
        wy[0] *= 0.5
        wy[j] *= 0.5
        out[j] = h * np.einsum("iab,ib->a", kern[j::-1], wy)
    return out


def _series_once(model: SemiMarkovModel, r0: np.ndarray, t: float, k_max: int, n_quad: int, ordering: str):
    nodes = np.linspace(0.0, t, n_quad)
    h = nodes[1] - nodes[0]
    fmaps = scipy.linalg.expm(nodes[:, None, None] * model.lf[None])
    fv = model.wtd.pdf(nodes)[:, None, None] * fmaps
    gv = model.wtd.survival(nodes)[:, None, None] * fmaps
    e = model.e_super
    x0 = vec(r0)
    if ordering == "micromaser":
        y = gv @ x0
        total = y[-1].copy()
        for _ in range(k_max):
            y = _conv(fv, y @ e.T, h)
            total += y[-1]
        return total
    total = gv[-1] @ x0
    v = fv @ x0
    for k in range(1, k_max + 1):
        ev = v @ e.T
        wts = np.full(n_quad, h)
        wts[0] = wts[-1] = 0.5 * h
        total += np.einsum("iab,ib->a", gv[::-1], ev * wts[:, None])
        if k < k_max:
            v = _conv(fv, ev, h)
    return total


@dataclass(frozen=True)
class SeriesResult:
    state: np.ndarray
    tail_bound: float
    k_max: int
    n_quad: int


def series_evaluate(model: SemiMarkovModel, rho0, t: float, k_max: int, n_quad: int,
                    ordering: str = "micromaser", richardson: bool = True) -> SeriesResult:
    """First ``k_max + 1`` jump-number terms of the piecewise evolution at time ``t``.

    Every convolution is a trapezoidal product rule on ``n_quad`` uniform nodes;
    with ``richardson`` the result is combined with a run on the halved step.
    ``tail_bound`` is the renewal probability of more than ``k_max`` jumps.
    """
    _check_ordering(ordering)
    r0 = _check_rho0(model, rho0)
    if not np.isfinite(t) or t < 0:
        raise InvalidInputError(f"time must be nonnegative, got {t}")
    if int(k_max) != k_max or k_max < 0:
        raise InvalidInputError(f"k_max must be a nonnegative integer, got {k_max}")
    if int(n_quad) != n_quad or n_quad < 2:
        raise InvalidInputError(f"n_quad must be an integer >= 2, got {n_quad}")
    k_max, n_quad = int(k_max), int(n_quad)
    d = model.dim
    if t == 0:
        return SeriesResult(r0.astype(complex), 0.0, k_max, n_quad)
    coarse = _series_once(model, r0, t, k_max, n_quad, ordering)
    if richardson and k_max > 0:
        fine = _series_once(model, r0, t, k_max, 2 * n_quad - 1, ordering)
        coarse = (4.0 * fine - coarse) / 3.0
    tail = max(0.0, 1.0 - float(renewal_count_probs(model.wtd, t, k_max).sum()))
    return SeriesResult(unvec(coarse, (d, d)), tail, k_max, n_quad)


# ---------------------------------------------------------------- Monte Carlo

@dataclass(frozen=True)
class MCResult:
    """Trajectory average; ``stderr`` holds standard errors of the real parts in
    its real component and of the imaginary parts in its imaginary component."""

    grid: np.ndarray
    states: np.ndarray
    stderr: np.ndarray
    n_traj: int


class _FBatch:
    """Applies ``F(tau_i)`` to a batch of vectors."""

    def __init__(self, lf: np.ndarray):
        self.identity = not np.any(lf)
        self.lf = lf
        self.eig = None
        if not self.identity:
            w, v = np.linalg.eig(lf)
            if np.linalg.cond(v) < 1e8:
                self.eig = (w, v, np.linalg.inv(v))

    def __call__(self, taus: np.ndarray, x: np.ndarray) -> np.ndarray:
        if self.identity:
            return x
        if self.eig is not None:
            w, v, vi = self.eig
            return (np.exp(taus[:, None] * w[None]) * (x @ vi.T)) @ v.T
        mats = scipy.linalg.expm(taus[:, None, None] * self.lf[None])
        return np.einsum("nab,nb->na", mats, x)


def _mc_block(model: SemiMarkovModel, x0: np.ndarray, grid: np.ndarray, n: int, seed: int, block: int,
              ordering: str, fb: _FBatch):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))
    t_max = grid[-1]
    cols = []
    reached = np.zeros(n)
    while True:
        tau = model.wtd.sample(n, rng)
        cols.append(tau)
        reached += tau
        if reached.min() > t_max:
            break
    taus = np.stack(cols, axis=1)
    times = np.cumsum(taus, axis=1)
    e = model.e_super
    d2 = x0.size
    sums = np.zeros((grid.size, d2), dtype=complex)
    sq_re = np.zeros((grid.size, d2))
    sq_im = np.zeros((grid.size, d2))
    rows = np.arange(n)
    powers = None
    if fb.identity:
        powers = [x0]
        for _ in range(taus.shape[1]):
            powers.append(e @ powers[-1])
        powers = np.array(powers)
    for gi, t in enumerate(grid):
        k = (times <= t).sum(axis=1)
        if powers is not None:
            x = powers[k]
        else:
            last = np.where(k > 0, times[rows, np.maximum(k - 1, 0)], 0.0)
            resid = t - last
            if ordering == "micromaser":
                x = fb(resid, np.broadcast_to(x0, (n, d2)))
                for j in range(int(k.max(initial=0))):
                    sel = k > j
                    x[sel] = fb(taus[sel, j], x[sel] @ e.T)
            else:
                x = np.broadcast_to(x0, (n, d2)).copy()
                for j in range(int(k.max(initial=0))):
                    sel = k > j
                    x[sel] = fb(taus[sel, j], x[sel]) @ e.T
                x = fb(resid, x)
        sums[gi] = x.sum(axis=0)
        sq_re[gi] = (x.real ** 2).sum(axis=0)
        sq_im[gi] = (x.imag ** 2).sum(axis=0)
    return sums, sq_re, sq_im


def mc_simulate(model: SemiMarkovModel, rho0, grid, n_traj: int, seed: int = 0,
                ordering: str = "micromaser", workers: int = 1, block_size: int = MC_BLOCK) -> MCResult:
    """Trajectory average of the piecewise jump / continuous evolution.

    Trajectories are grouped in fixed blocks; block ``b`` draws from the stream
    ``SeedSequence(seed, spawn_key=(b,))`` and block results are reduced in
    block order, so output does not depend on ``workers``.
    """
    _check_ordering(ordering)
    r0 = _check_rho0(model, rho0)
    grid = _check_grid(grid)
    if int(n_traj) != n_traj or n_traj < 1:
        raise InvalidInputError(f"n_traj must be a positive integer, got {n_traj}")
    n_traj = int(n_traj)
    d = model.dim
    x0 = vec(r0).astype(complex)
    fb = _FBatch(model.lf)
    sizes = [min(block_size, n_traj - s) for s in range(0, n_traj, block_size)]

    def job(b):
        return _mc_block(model, x0, grid, sizes[b], seed, b, ordering, fb)

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(job, range(len(sizes))))
    else:
        parts = [job(b) for b in range(len(sizes))]
    sums = sum(p[0] for p in parts)
    sq_re = sum(p[1] for p in parts)
    sq_im = sum(p[2] for p in parts)
    mean = sums / n_traj
    denom = max(n_traj - 1, 1)
    var_re = np.clip((sq_re - n_traj * mean.real ** 2) / denom, 0.0, None)
    var_im = np.clip((sq_im - n_traj * mean.imag ** 2) / denom, 0.0, None)
    se = np.sqrt(var_re / n_traj) + 1j * np.sqrt(var_im / n_traj)
    states = np.stack([unvec(row, (d, d)) for row in mean])
    stderr = np.stack([unvec(row, (d, d)) for row in se])
    return MCResult(grid, states, stderr, n_traj)


def dynamics_family(model: SemiMarkovModel, grid, ordering: str = "micromaser", method: str = "laplace",
                    n_nodes: int = talbot.DEFAULT_NODES, cp_tol: float = 1e-8):
    """The induced dynamical maps as a :class:`~memdyn.nonmarkov.DynamicsFamily`."""
    from ..nonmarkov import DynamicsFamily

    if method == "laplace":
        props = laplace_propagators(model, grid, ordering, n_nodes)
    elif method == "embedding":
        props = embedded_propagators(model, _check_grid(grid), ordering)
    else:
        raise InvalidInputError(f"method must be 'laplace' or 'embedding', got {method!r}")
    return DynamicsFamily(model.dim, np.asarray(grid, dtype=float), props, cp_tol=cp_tol)
