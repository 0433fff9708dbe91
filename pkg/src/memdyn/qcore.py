"""Dense quantum-information primitives.

Conventions, fixed for the whole package:

* Operators are vectorized by column stacking, ``vec(A) = A.reshape(-1, order="F")``,
  so a superoperator acts as ``S @ vec(rho) == vec(Phi[rho])`` and
  ``vec(A X B) = (B.T kron A) vec(X)``.
* The Choi matrix is unnormalized, ``C = sum_ij |i><j| kron Phi[|i><j|]`` (input
  factor first); its trace is ``d_in`` for trace-preserving maps.
* Tensor products use ``np.kron`` with the first factor as the outer (block) index,
  i.e. ``(A kron B)[(i, k), (j, l)] = A[i, j] * B[k, l]`` with row-major composite
  index ``i * dim(B) + k``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import InvalidInputError, NotCompletelyPositiveError

HERM_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
# |0> is the ground state, |1> the excited one.
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.T.copy()


def as_square(a, name: str = "matrix") -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidInputError(f"{name} must be a square matrix, got shape {m.shape}")
    return m


def hermiticity_defect(a) -> float:
    m = np.asarray(a)
    return float(np.abs(m - m.conj().T).max()) if m.size else 0.0


def hermitize(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    return 0.5 * (m + m.conj().T)


def vec(a) -> np.ndarray:
    """Column-stack a matrix into a vector."""
    return np.asarray(a).reshape(-1, order="F")


def unvec(v, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Inverse of :func:`vec`; square output unless ``shape`` is given."""
    v = np.asarray(v)
    if shape is None:
        d = int(round(np.sqrt(v.size)))
        if d * d != v.size:
            raise InvalidInputError(f"cannot unvec a vector of length {v.size} into a square matrix")
        shape = (d, d)
    return v.reshape(shape, order="F")


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).ravel()
    return np.outer(psi, psi.conj())


@dataclass(frozen=True, eq=False)
class HermitianOp:
    """Hermitian operator, e.g. an observable or a Helstrom matrix."""

    data: np.ndarray

    def __post_init__(self):
        m = as_square(self.data, "Hermitian operator")
        defect = hermiticity_defect(m)
        if defect > HERM_TOL * max(1.0, float(np.abs(m).max(initial=0.0))):
            raise InvalidInputError(f"operator is not Hermitian (defect {defect:.3e})")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "data", m)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)


@dataclass(frozen=True, eq=False)
class DensityMatrix(HermitianOp):
    """Validated quantum state: Hermitian, unit trace, positive semidefinite.

    ``psd_tol`` and ``trace_tol`` may be loosened for states produced by
    stochastic or truncated solvers.
    """

    trace_tol: float = field(default=TRACE_TOL, repr=False)
    psd_tol: float = field(default=PSD_TOL, repr=False)

    def __post_init__(self):
        super().__post_init__()
        tr = np.trace(self.data)
        if abs(tr - 1.0) > self.trace_tol:
            raise InvalidInputError(f"state trace is {tr.real:.12g}{tr.imag:+.3g}j, expected 1")
        lo = float(np.linalg.eigvalsh(hermitize(self.data))[0])
        if lo < -self.psd_tol:
            raise InvalidInputError(f"state is not positive semidefinite (min eigenvalue {lo:.3e})")

    @classmethod
    def pure(cls, psi) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex).ravel()
        return cls(projector(psi / np.linalg.norm(psi)))

    @classmethod
    def basis(cls, index: int, dim: int) -> "DensityMatrix":
        return cls(projector(ket(index, dim)))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim, dtype=complex) / dim)


def validate_state(rho, trace_tol: float = TRACE_TOL, psd_tol: float = PSD_TOL) -> np.ndarray:
    """Return ``rho`` as an array after checking the DensityMatrix invariants."""
    return DensityMatrix(np.asarray(rho), trace_tol=trace_tol, psd_tol=psd_tol).data


def _abs_eig_sum(x: np.ndarray) -> np.ndarray:
    """Trace norm of a stack of Hermitian matrices (no Hermiticity check)."""
    if x.shape[-1] == 2:
        a = x[..., 0, 0].real
        d = x[..., 1, 1].real
        b = x[..., 0, 1]
        half_tr = 0.5 * (a + d)
        rad = np.sqrt(0.25 * (a - d) ** 2 + np.abs(b) ** 2)
        return np.abs(half_tr + rad) + np.abs(half_tr - rad)
    h = 0.5 * (x + np.conj(np.swapaxes(x, -1, -2)))
    return np.abs(np.linalg.eigvalsh(h)).sum(axis=-1)


def trace_norm(a) -> float:
    """Sum of absolute eigenvalues of a Hermitian operator."""
    m = as_square(a, "operator")
    defect = hermiticity_defect(m)
    if defect > HERM_TOL * max(1.0, float(np.abs(m).max(initial=0.0))):
        raise InvalidInputError(f"trace_norm requires a Hermitian operator (defect {defect:.3e})")
    return float(np.abs(np.linalg.eigvalsh(hermitize(m))).sum())


def trace_norm_batch(stack) -> np.ndarray:
    """Vectorized trace norm over the leading axes of ``(..., d, d)``; inputs assumed Hermitian."""
    return _abs_eig_sum(np.asarray(stack, dtype=complex))


def _same_dims(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise InvalidInputError(f"dimension mismatch: {a.shape} vs {b.shape}")


def trace_distance(rho, sigma) -> float:
    r, s = as_square(rho, "rho"), as_square(sigma, "sigma")
    _same_dims(r, s)
    return 0.5 * trace_norm(r - s)


def helstrom_norm(rho1, rho2, p1: float, p2: float) -> float:
    """Trace norm of the Helstrom matrix ``p1*rho1 - p2*rho2``."""
    if p1 < 0 or p2 < 0 or abs(p1 + p2 - 1.0) > 1e-12:
        raise InvalidInputError(f"weights must be nonnegative and sum to 1, got ({p1}, {p2})")
    r1, r2 = as_square(rho1, "rho1"), as_square(rho2, "rho2")
    _same_dims(r1, r2)
    return trace_norm(p1 * r1 - p2 * r2)


def tensor(a, b) -> np.ndarray:
    return np.kron(np.asarray(a), np.asarray(b))


def partial_trace(rho, d_s: int, d_e: int, keep: str = "system") -> np.ndarray:
    """Marginal of a bipartite operator on ``H_S kron H_E``."""
    m = as_square(rho, "bipartite state")
    if m.shape[0] != d_s * d_e:
        raise InvalidInputError(f"state of dimension {m.shape[0]} does not factor as {d_s} x {d_e}")
    t = m.reshape(d_s, d_e, d_s, d_e)
    if keep == "system":
        return np.einsum("aebe->ab", t)
    if keep == "environment":
        return np.einsum("sasb->ab", t)
    raise InvalidInputError(f"keep must be 'system' or 'environment', not {keep!r}")


# ---------------------------------------------------------------------------
# quantum maps
# ---------------------------------------------------------------------------

REPRESENTATIONS = ("kraus", "superop", "choi")


def kraus_to_superop(kraus: Sequence[np.ndarray]) -> np.ndarray:
    return sum(np.kron(k.conj(), k) for k in kraus)


def superop_to_choi(s: np.ndarray, dim_in: int, dim_out: int) -> np.ndarray:
    s4 = np.asarray(s).reshape(dim_out, dim_out, dim_in, dim_in)
    n = dim_in * dim_out
    return np.transpose(s4, (3, 1, 2, 0)).reshape(n, n)


def choi_to_superop(c: np.ndarray, dim_in: int, dim_out: int) -> np.ndarray:
    c4 = np.asarray(c).reshape(dim_in, dim_out, dim_in, dim_out)
    return np.transpose(c4, (3, 1, 2, 0)).reshape(dim_out * dim_out, dim_in * dim_in)


def choi_eigvals(c: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(hermitize(c))


def choi_to_kraus(c: np.ndarray, dim_in: int, dim_out: int, tol: float = PSD_TOL) -> list[np.ndarray]:
    w, v = np.linalg.eigh(hermitize(c))
    if w[0] < -tol:
        raise NotCompletelyPositiveError(w[0])
    cutoff = max(1e-14, 1e-14 * float(w[-1]))
    return [np.sqrt(lam) * v[:, k].reshape(dim_in, dim_out).T for k, lam in enumerate(w) if lam > cutoff]


@dataclass(frozen=True, eq=False)
class QuantumMap:
    """Linear map on operators held in one of three representations.

    Build with :meth:`from_kraus`, :meth:`from_superop` or :meth:`from_choi`; the
    other representations are derived lazily and cached.
    """

    dim_in: int
    dim_out: int
    representation: str
    data: object

    @classmethod
    def from_kraus(cls, kraus) -> "QuantumMap":
        ops = [np.asarray(k, dtype=complex) for k in kraus]
        if not ops:
            raise InvalidInputError("a Kraus list needs at least one operator")
        shape = ops[0].shape
        if any(k.ndim != 2 or k.shape != shape for k in ops):
            raise InvalidInputError("Kraus operators must be matrices of a common shape")
        return cls(shape[1], shape[0], "kraus", tuple(ops))

    @classmethod
    def from_superop(cls, s, dim_in: int | None = None, dim_out: int | None = None) -> "QuantumMap":
        s = np.asarray(s, dtype=complex)
        if s.ndim != 2:
            raise InvalidInputError("superoperator must be a matrix")
        dout = dim_out or int(round(np.sqrt(s.shape[0])))
        din = dim_in or int(round(np.sqrt(s.shape[1])))
        if s.shape != (dout * dout, din * din):
            raise InvalidInputError(f"superoperator shape {s.shape} inconsistent with dims ({din}, {dout})")
        return cls(din, dout, "superop", s)

    @classmethod
    def from_choi(cls, c, dim_in: int, dim_out: int | None = None) -> "QuantumMap":
        c = np.asarray(c, dtype=complex)
        dout = dim_out or dim_in
        if c.shape != (dim_in * dout, dim_in * dout):
            raise InvalidInputError(f"Choi shape {c.shape} inconsistent with dims ({dim_in}, {dout})")
        return cls(dim_in, dout, "choi", c)

    @classmethod
    def identity(cls, dim: int) -> "QuantumMap":
        return cls.from_superop(np.eye(dim * dim, dtype=complex))

    @cached_property
    def superop(self) -> np.ndarray:
        if self.representation == "superop":
            return self.data
        if self.representation == "kraus":
            return kraus_to_superop(self.data)
        return choi_to_superop(self.data, self.dim_in, self.dim_out)

    @cached_property
    def choi(self) -> np.ndarray:
        if self.representation == "choi":
            return self.data
        return superop_to_choi(self.superop, self.dim_in, self.dim_out)

    @cached_property
    def kraus(self) -> tuple[np.ndarray, ...]:
        """Kraus operators; raises NotCompletelyPositiveError for non-CP maps."""
        if self.representation == "kraus":
            return self.data
        return tuple(choi_to_kraus(self.choi, self.dim_in, self.dim_out))

    def __call__(self, rho) -> np.ndarray:
        return apply_map(self, rho)

    def compose(self, other: "QuantumMap") -> "QuantumMap":
        """``self`` after ``other``."""
        if other.dim_out != self.dim_in:
            raise InvalidInputError("dimension mismatch in map composition")
        return QuantumMap.from_superop(self.superop @ other.superop, other.dim_in, self.dim_out)


def map_convert(m: QuantumMap, target: str) -> QuantumMap:
    if target not in REPRESENTATIONS:
        raise InvalidInputError(f"unknown representation {target!r}")
    if target == "kraus":
        return QuantumMap.from_kraus(m.kraus)
    if target == "superop":
        return QuantumMap.from_superop(m.superop, m.dim_in, m.dim_out)
    return QuantumMap.from_choi(m.choi, m.dim_in, m.dim_out)


@dataclass(frozen=True)
class CPTPReport:
    cp: bool
    tp: bool
    min_choi_eig: float
    tp_defect: float


def tp_defect(m: QuantumMap) -> float:
    """``max|sum_k K_k^dag K_k - 1|``, computed from the Choi matrix so it also covers non-CP maps."""
    c4 = m.choi.reshape(m.dim_in, m.dim_out, m.dim_in, m.dim_out)
    gram = np.einsum("iaja->ji", c4)
    return float(np.abs(gram - np.eye(m.dim_in)).max())


def is_cptp(m: QuantumMap, tol: float = PSD_TOL) -> CPTPReport:
    lo = float(choi_eigvals(m.choi)[0])
    defect = tp_defect(m)
    return CPTPReport(cp=lo >= -tol, tp=defect <= tol, min_choi_eig=lo, tp_defect=defect)


def apply_map(m: QuantumMap, rho) -> np.ndarray:
    r = np.asarray(rho, dtype=complex)
    if r.shape != (m.dim_in, m.dim_in):
        raise InvalidInputError(f"map expects a {m.dim_in}x{m.dim_in} operator, got {r.shape}")
    if m.representation == "kraus":
        return sum(k @ r @ k.conj().T for k in m.data)
    return unvec(m.superop @ vec(r), (m.dim_out, m.dim_out))


def apply_superop(s: np.ndarray, rho) -> np.ndarray:
    """Apply a square superoperator matrix to an operator."""
    r = np.asarray(rho, dtype=complex)
    return unvec(s @ vec(r), r.shape)


def transpose_map(dim: int) -> QuantumMap:
    """The transposition map: positive but not completely positive."""
    return QuantumMap.from_choi(swap_matrix(dim), dim, dim)


def swap_matrix(dim: int) -> np.ndarray:
    s = np.zeros((dim * dim, dim * dim), dtype=complex)
    for i in range(dim):
        for j in range(dim):
            s[i * dim + j, j * dim + i] = 1.0
    return s


def depolarizing_map(dim: int) -> QuantumMap:
    """Completely depolarizing channel ``rho -> Tr(rho) 1/d``."""
    ops = [np.outer(ket(a, dim), ket(i, dim)) / np.sqrt(dim) for a in range(dim) for i in range(dim)]
    return QuantumMap.from_kraus(ops)


def unitary_map(u) -> QuantumMap:
    return QuantumMap.from_kraus([np.asarray(u, dtype=complex)])
