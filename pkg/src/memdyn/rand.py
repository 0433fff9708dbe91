"""Random states, maps and models used as fixtures by tests and property checks."""
from __future__ import annotations

import numpy as np

from .qcore import QuantumMap, projector


def _rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def ginibre(rows: int, cols: int, rng=None) -> np.ndarray:
    rng = _rng(rng)
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)


def random_pure_state(dim: int, rng=None) -> np.ndarray:
    psi = ginibre(dim, 1, rng).ravel()
    return projector(psi / np.linalg.norm(psi))


def random_density_matrix(dim: int, rng=None, rank: int | None = None) -> np.ndarray:
    """Hilbert-Schmidt random state (of the given rank, full rank by default)."""
    a = ginibre(dim, rank or dim, rng)
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_hermitian(dim: int, rng=None, scale: float = 1.0) -> np.ndarray:
    a = ginibre(dim, dim, rng)
    return scale * 0.5 * (a + a.conj().T)


def random_unitary(dim: int, rng=None) -> np.ndarray:
    q, r = np.linalg.qr(ginibre(dim, dim, rng))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_kraus(dim_in: int, dim_out: int | None = None, n_kraus: int = 3, rng=None) -> list[np.ndarray]:
    """Complex-Gaussian Kraus list normalized to be trace preserving.

    Normalization multiplies every operator on the right by ``(sum K^dag K)^(-1/2)``.
    """
    rng = _rng(rng)
    dim_out = dim_out or dim_in
    ops = [ginibre(dim_out, dim_in, rng) for _ in range(n_kraus)]
    gram = sum(k.conj().T @ k for k in ops)
    w, v = np.linalg.eigh(gram)
    inv_sqrt = (v / np.sqrt(w)) @ v.conj().T
    return [k @ inv_sqrt for k in ops]


def random_cptp(dim: int, n_kraus: int = 3, rng=None) -> QuantumMap:
    return QuantumMap.from_kraus(random_kraus(dim, dim, n_kraus, rng))


def random_gksl(dim: int, rng=None, n_channels: int = 2, h_scale: float = 1.0, rate_scale: float = 1.0):
    from .gksl import GKSLModel

    rng = _rng(rng)
    h = random_hermitian(dim, rng, h_scale)
    channels = [(float(rate_scale * rng.uniform(0.1, 1.0)), ginibre(dim, dim, rng) / np.sqrt(dim))
                for _ in range(n_channels)]
    return GKSLModel(h, channels)


def random_bipartite(d_s: int, d_e: int, rng=None, coupling: float = 1.0):
    from .total import BipartiteModel

    rng = _rng(rng)
    h = (np.kron(random_hermitian(d_s, rng), np.eye(d_e)) + np.kron(np.eye(d_s), random_hermitian(d_e, rng))
         + coupling * random_hermitian(d_s * d_e, rng))
    return BipartiteModel(d_s, d_e, h, random_density_matrix(d_e, rng))

