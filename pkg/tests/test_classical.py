import numpy as np
import pytest

from memdyn.errors import InvalidInputError, UnsupportedEmbeddingError
from memdyn.models import bit_flip_map, cyclic, erlang_parity, telegraph
from memdyn.qcore import is_cptp
from memdyn.semimarkov import (
    ClassicalSemiMarkov,
    classical_embedding,
    classical_gme_solve,
    classical_mc,
    convolution,
    erlang,
    exponential,
    extended_chain_solve,
    hyperexponential,
    laplace_series,
    stochastic_violations,
)

GRID = np.linspace(0, 5, 21)


def heterogeneous():
    pi = np.array([[0.0, 0.3, 0.5], [0.6, 0.0, 0.5], [0.4, 0.7, 0.0]])
    wtds = (erlang(2, 1.5), hyperexponential([0.3, 0.7], [0.5, 2.0]), convolution(exponential(1), exponential(3)))
    return ClassicalSemiMarkov(pi, wtds)


def test_validation():
    assert stochastic_violations([[0.5, 1.0], [0.4, 0.0]]) == ["pi column 0 sums to 0.90000000000000002, expected 1"]
    with pytest.raises(InvalidInputError, match="column 1"):
        ClassicalSemiMarkov([[1.0, 0.2], [0.0, 0.7]], (exponential(1),) * 2)
    with pytest.raises(InvalidInputError):
        ClassicalSemiMarkov(np.eye(2), (exponential(1),))
    with pytest.raises(InvalidInputError):
        classical_gme_solve(telegraph(), [0.5, 0.6], GRID)


def test_self_jumps_constant():
    c = ClassicalSemiMarkov.uniform(np.eye(3), erlang(2, 1.0))
    p0 = [0.2, 0.5, 0.3]
    assert np.abs(classical_gme_solve(c, p0, GRID) - p0).max() < 1e-8


def test_telegraph_closed_forms():
    lam = 0.9
    p = classical_gme_solve(telegraph(exponential(lam)), [1, 0], GRID)
    assert np.abs(p[:, 0] - 0.5 * (1 + np.exp(-2 * lam * GRID))).max() < 1e-8
    p = classical_gme_solve(telegraph(erlang(2, lam)), [1, 0], GRID)
    assert np.abs(p[:, 0] - 0.5 * (1 + erlang_parity(GRID, lam))).max() < 1e-8
    assert np.abs(p.sum(axis=1) - 1).max() < 1e-8 and p.min() > -1e-8


def test_gme_matches_extended_chain():
    c = heterogeneous()
    p0 = [0.5, 0.2, 0.3]
    a = classical_gme_solve(c, p0, GRID)
    b = extended_chain_solve(c, p0, GRID)
    assert np.abs(a - b).max() < 1e-8


def test_mc_agrees():
    for c, p0 in ((telegraph(), [1, 0]), (heterogeneous(), [0.5, 0.2, 0.3])):
        mean, se = classical_mc(c, p0, GRID, 40000, seed=4)
        ref = classical_gme_solve(c, p0, GRID)
        live = se > 0
        assert np.all(np.abs(mean - ref)[~live] < 1e-8)
        z = (mean - ref)[live] / se[live]
        # dozens of entries are compared at once, so the bound on the largest one is family-wise
        assert np.abs(z).max() < 4 and np.mean(z**2) < 2


def test_mc_examples():
    c = ClassicalSemiMarkov.uniform(np.eye(1), exponential(1.0))
    mean, se = classical_mc(c, [1.0], GRID, 100, seed=0)
    assert np.all(mean == 1) and np.all(se == 0)
    a = classical_mc(heterogeneous(), [0.5, 0.2, 0.3], GRID, 5000, seed=9)
    b = classical_mc(heterogeneous(), [0.5, 0.2, 0.3], GRID, 5000, seed=9)
    assert np.array_equal(a[0], b[0])


def test_embedding():
    c = telegraph()
    m = classical_embedding(c)
    # incoherent flip: same action as the unitary bit flip on diagonal states
    flip = bit_flip_map()
    for p in (0.0, 0.35, 1.0):
        r = np.diag([p, 1 - p])
        assert np.abs(m.E(r) - flip(r)).max() < 1e-15
    q = laplace_series(m, np.diag([1.0, 0.0]), GRID)
    assert np.abs(np.einsum("nii->ni", q).real - classical_gme_solve(c, [1, 0], GRID)).max() < 1e-8
    # pi = 1 gives Kraus operators |n><n|: identity on diagonal states, coherences removed
    ident = classical_embedding(ClassicalSemiMarkov.uniform(np.eye(2), exponential(1)))
    assert np.abs(ident.e_super - np.diag([1, 0, 0, 1])).max() < 1e-15
    cyc = cyclic(3)
    m3 = classical_embedding(cyc)
    rep = is_cptp(m3.E)
    assert rep.cp and rep.tp
    p0 = [0.6, 0.3, 0.1]
    q = laplace_series(m3, np.diag(p0), GRID)
    assert np.abs(np.einsum("nii->ni", q).real - classical_gme_solve(cyc, p0, GRID)).max() < 1e-8
    with pytest.raises(UnsupportedEmbeddingError):
        classical_embedding(heterogeneous())
