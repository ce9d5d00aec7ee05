import numpy as np
import pytest

from lowmach.grid import build_grid


def random_faces(grid, rng, scale=1.0):
    u = grid.face_zeros()
    for i in range(grid.d):
        u[i] = np.where(grid.face_mask(i), scale * rng.standard_normal(grid.face_shape(i)), 0.0)
    return u


def dense_from_action(grid, action):
    """Dense matrix of a linear map on packed face unknowns, by applying it to unit vectors."""
    n = grid.n_unknowns
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        cols.append(grid.pack(action(grid.unpack(e))))
    return np.column_stack(cols)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=[(4, 5), (3, 4, 2)], ids=["2d", "3d"])
def grid(request):
    dims = request.param
    return build_grid(dims, lengths=tuple(0.7 + 0.3 * k for k in range(len(dims))))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
