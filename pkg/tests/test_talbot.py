import numpy as np
import pytest
import scipy.linalg

from memdyn.errors import ContourError, InvalidInputError
from memdyn.semimarkov.talbot import check_poles, invert, invert_many, talbot_nodes


def test_scalar_transforms():
    for t in (0.1, 1.0, 5.0):
        assert abs(invert(lambda u: 1 / (u + 2), t) - np.exp(-2 * t)) < 1e-10
        assert abs(invert(lambda u: 1 / (u**2 + 1), t) - np.sin(t)) < 1e-10
        assert abs(invert(lambda u: 1 / u, t) - 1) < 1e-10


def test_matrix_transform():
    a = np.array([[-1.0, 2.0], [-2.0, -0.5]])
    tr = lambda u: np.linalg.solve(u[:, None, None] * np.eye(2) - a, np.broadcast_to(np.eye(2), (u.size, 2, 2)))
    times = np.array([0.2, 1.0, 3.0])
    got = invert_many(tr, times, poles=np.linalg.eigvals(a))
    for t, g in zip(times, got):
        assert np.abs(g - scipy.linalg.expm(a * t)).max() < 1e-10


def test_node_convergence():
    f = lambda u: 1 / (u + 1) ** 2
    errs = [abs(invert(f, 2.0, n) - 2 * np.exp(-2)) for n in (8, 16, 32)]
    assert errs[2] < errs[1] < errs[0]


def test_pole_check():
    check_poles([-1.0, -0.5 + 3j], 1.0)
    with pytest.raises(ContourError) as exc:
        invert(lambda u: 1 / (u - 20), 1.0, poles=[20.0])
    assert exc.value.pole == 20
    # fast oscillation escapes the contour at large t
    with pytest.raises(ContourError):
        check_poles([-0.1 + 30j], 5.0)


def test_bad_arguments():
    with pytest.raises(InvalidInputError):
        talbot_nodes(0.0)
    with pytest.raises(InvalidInputError):
        talbot_nodes(1.0, 1)
