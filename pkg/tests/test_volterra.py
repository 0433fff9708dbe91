import numpy as np
import pytest
import scipy.linalg

from memdyn.errors import InvalidInputError
from memdyn.gksl import GKSLModel
from memdyn.models import bit_flip_map, bit_flip_semimarkov, erlang_parity, noncommuting_semimarkov
from memdyn.qcore import projector, unvec, vec
from memdyn.semimarkov import SemiMarkovModel, exponential, laplace_series, solve_volterra, volterra_solution

GROUND = projector([1, 0])
RHO = np.array([[0.3, 0.2 - 0.35j], [0.2 + 0.35j, 0.7]])
E = bit_flip_map().superop


def erlang_kernel(grid, lam=1.0):
    return lam**2 * np.exp(-2 * lam * grid)[:, None, None] * (E - np.eye(4))


def test_zero_kernel():
    grid = np.linspace(0, 2, 21)
    out = solve_volterra(np.zeros((21, 4, 4)), RHO, grid)
    assert np.abs(out - RHO).max() == 0


def test_closed_form_kernel_second_order():
    errs = []
    for n in (101, 201, 401):
        grid = np.linspace(0, 4, n)
        out = solve_volterra(erlang_kernel(grid), GROUND, grid)
        errs.append(np.abs(out[:, 0, 0].real - 0.5 * (1 + erlang_parity(grid))).max())
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert orders.min() > 1.9
    assert errs[-1] < 1e-5


def test_delta_kernel_is_semigroup():
    lam = 1.3
    local = lam * (E - np.eye(4))
    grid = np.linspace(0, 2, 201)
    out = solve_volterra(np.zeros((201, 4, 4)), RHO, grid, local=local)
    exact = np.stack([unvec(scipy.linalg.expm(t * local) @ vec(RHO)) for t in grid])
    assert np.abs(out - exact).max() < 1e-4
    m = SemiMarkovModel(bit_flip_map(), GKSLModel.trivial(2), exponential(lam))
    assert np.abs(volterra_solution(m, RHO, grid) - out).max() < 1e-10


def test_matches_laplace():
    grid = np.linspace(0, 3, 301)
    for m in (bit_flip_semimarkov(), noncommuting_semimarkov()):
        for ordering in ("micromaser", "collision"):
            a = volterra_solution(m, RHO, grid, ordering)
            b = laplace_series(m, RHO, grid[::30], ordering)
            assert np.abs(a[::30] - b).max() < 1e-4
            assert np.abs(np.einsum("nii->n", a) - 1).max() < 1e-8


def test_input_errors():
    grid = np.array([0.0, 0.1, 0.3])
    with pytest.raises(InvalidInputError):
        solve_volterra(np.zeros((3, 4, 4)), RHO, grid)
    with pytest.raises(InvalidInputError):
        solve_volterra(np.zeros((2, 4, 4)), RHO, np.linspace(0, 1, 3))
    with pytest.raises(InvalidInputError):
        solve_volterra(np.zeros((3, 4, 4)), RHO, np.linspace(0.5, 1, 3))
