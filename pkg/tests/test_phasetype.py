import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.stats import poisson

from memdyn.errors import InvalidInputError
from memdyn.semimarkov import (
    PhaseTypeWTD,
    convolution,
    erlang,
    exponential,
    hyperexponential,
    mixture,
    renewal_count_probs,
)

T = np.linspace(0, 6, 25)


def test_exponential():
    w = exponential(1.5)
    assert np.abs(w.pdf(T) - 1.5 * np.exp(-1.5 * T)).max() < 1e-12
    u = np.array([0.3, 2 + 1j, -0.5 + 4j])
    assert np.abs(w.laplace(u) - 1.5 / (u + 1.5)).max() < 1e-12
    assert abs(w.mean - 1 / 1.5) < 1e-15


def test_erlang():
    lam = 0.8
    w = erlang(2, lam)
    assert np.abs(w.pdf(T) - lam**2 * T * np.exp(-lam * T)).max() < 1e-12
    assert np.abs(w.survival(T) - (1 + lam * T) * np.exp(-lam * T)).max() < 1e-12
    u = np.array([0.0, 1.0, 0.2 + 3j])
    assert np.abs(w.laplace(u) - lam**2 / (u + lam) ** 2).max() < 1e-12
    assert w.f0 == 0


def test_mixture_and_hyper():
    w = mixture(0.5, exponential(1), exponential(2))
    assert abs(w.pdf(0.0) - 1.5) < 1e-15
    h = hyperexponential([0.5, 0.5], [1, 2])
    assert np.abs(h.pdf(T) - w.pdf(T)).max() < 1e-15
    assert abs(w.f0 - 1.5) < 1e-15


def test_convolution():
    w = convolution(exponential(1), exponential(2))
    assert np.abs(w.pdf(T) - 2 * (np.exp(-T) - np.exp(-2 * T))).max() < 1e-12
    assert abs(w.mean - 1.5) < 1e-14
    assert erlang(3, 1.2).same_as(convolution(erlang(2, 1.2), exponential(1.2)))


def test_validation_errors():
    with pytest.raises(InvalidInputError):
        exponential(0)
    with pytest.raises(InvalidInputError):
        erlang(2, -1)
    with pytest.raises(InvalidInputError):
        erlang(1.5, 1)
    with pytest.raises(InvalidInputError):
        hyperexponential([0.5, 0.6], [1, 2])
    with pytest.raises(InvalidInputError):
        mixture(1.2, exponential(1), exponential(2))
    with pytest.raises(InvalidInputError):
        PhaseTypeWTD([0.5, 0.4], -np.eye(2))
    with pytest.raises(InvalidInputError):
        PhaseTypeWTD([1.0, 0.0], [[-1, -0.5], [0, -1]])
    with pytest.raises(InvalidInputError):
        PhaseTypeWTD([1.0, 0.0], [[-1, 2], [0, -1]])
    # closed stage loop never absorbs
    with pytest.raises(InvalidInputError):
        PhaseTypeWTD([1.0, 0.0], [[-1, 1], [1, -1]])


def test_sampling_mean():
    w = mixture(0.3, erlang(3, 2.0), exponential(0.7))
    x = w.sample(200000, np.random.default_rng(0))
    se = x.std() / np.sqrt(x.size)
    assert abs(x.mean() - w.mean) < 4 * se
    y = exponential(2.0).sample(100000, np.random.default_rng(1))
    assert abs(y.mean() - 0.5) < 4 * y.std() / np.sqrt(y.size)


def test_renewal_counts_poisson():
    lam, t = 1.3, 2.0
    p = renewal_count_probs(exponential(lam), t, 12)
    assert np.abs(p - poisson.pmf(np.arange(13), lam * t)).max() < 1e-12
    # Erlang-2 renewals: k events need 2k or 2k+1 Poisson stages
    q = renewal_count_probs(erlang(2, lam), t, 6)
    stages = poisson.pmf(np.arange(14), lam * t)
    assert np.abs(q - (stages[0:14:2] + stages[1:14:2])[:7]).max() < 1e-12
    sums = np.cumsum(renewal_count_probs(erlang(2, 1.0), 3.0, 15))
    assert np.all(np.diff(sums) >= 0) and abs(sums[-1] - 1) < 1e-10


def random_wtd(rng):
    m = int(rng.integers(1, 4))
    off = rng.uniform(0, 1, (m, m)) * (rng.uniform(size=(m, m)) < 0.5)
    np.fill_diagonal(off, 0)
    exit_ = rng.uniform(0.2, 2, m)
    S = off - np.diag(off.sum(axis=1) + exit_)
    return PhaseTypeWTD(rng.dirichlet(np.ones(m)), S)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_wtd_invariants(seed):
    w = random_wtd(np.random.default_rng(seed))
    t = np.linspace(0, 8, 41)
    assert np.all(w.pdf(t) >= 0) and abs(w.survival(0.0) - 1) < 1e-14
    total, _ = quad(lambda x: float(w.pdf(x)), 0, np.inf, epsabs=1e-13, limit=200)
    assert abs(total - 1) < 1e-10
    h = 1e-5
    dg = (w.survival(t + h) - w.survival(np.maximum(t - h, 0))) / (t + h - np.maximum(t - h, 0))
    assert np.abs(dg[1:] + w.pdf(t[1:])).max() < 1e-8
    assert abs(w.laplace(0.0) - 1) < 1e-12
    assert abs(w.survival_laplace(0.0) - w.mean) < 1e-12
