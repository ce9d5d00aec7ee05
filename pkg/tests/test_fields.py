import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lowmach.fields import (
    norm_broken_h1,
    norm_l2_cells,
    norm_l2_faces,
    norm_linf_cells,
    norm_lq_cells,
    weighted_kinetic_energy,
    write_cell_csv,
    write_face_csv,
)
from lowmach.grid import build_grid


def test_cell_norms_of_constant():
    g = build_grid((4, 4), lengths=(2.0, 1.0))
    c = np.full(g.shape, 3.0)
    assert norm_l2_cells(g, c) == pytest.approx(3.0 * np.sqrt(2.0))
    assert norm_lq_cells(g, c, 1.5) == pytest.approx(3.0 * 2.0 ** (1 / 1.5))
    assert norm_linf_cells(g, c) == 3.0


@settings(max_examples=40, deadline=None)
@given(q=st.floats(1.0, 40.0), seed=st.integers(0, 2**31 - 1))
def test_lq_norm_matches_direct_formula(q, seed):
    g = build_grid((3, 5))
    f = np.random.default_rng(seed).standard_normal(g.shape)
    direct = (g.cell_volume * np.sum(np.abs(f) ** q)) ** (1 / q)
    assert norm_lq_cells(g, f, q) == pytest.approx(direct, rel=1e-10)


def test_lq_rejects_small_q():
    g = build_grid((2, 2))
    with pytest.raises(ValueError):
        norm_lq_cells(g, np.ones(g.shape), 0.5)


def test_lq_tiny_values_do_not_underflow():
    g = build_grid((2, 2))
    assert norm_lq_cells(g, np.full(g.shape, 1e-200), 2.0) == pytest.approx(1e-200)


def test_face_l2_ignores_external_faces():
    g = build_grid((3, 3))
    u = [np.ones(g.face_shape(i)) for i in range(2)]
    assert norm_l2_faces(g, u) ** 2 == pytest.approx(g.cell_volume * sum(g.n_internal))


def test_h1_norm_single_bump_by_hand():
    g = build_grid((3, 3))
    u = g.face_zeros()
    u[0][1, 1] = 1.0
    # along x: two jumps of 1 at distance h; along y: two interior jumps at distance h
    h2 = g.h[0] ** 2
    expected = g.cell_volume * (2 / h2 + 2 / h2)
    assert norm_broken_h1(g, u) ** 2 == pytest.approx(expected)
    u[0][1, 1] = 0.0
    u[0][1, 0] = 1.0
    # next to the wall y = 0 the boundary dual face carries weight 2 / h^2
    expected = g.cell_volume * (2 / h2 + 1 / h2 + 2 / h2)
    assert norm_broken_h1(g, u) ** 2 == pytest.approx(expected)


def test_weighted_kinetic_energy():
    g = build_grid((3, 3))
    u = [np.full(g.face_shape(i), 2.0) for i in range(2)]
    rd = [np.full(g.face_shape(i), 0.5) for i in range(2)]
    assert weighted_kinetic_energy(g, rd, u) == pytest.approx(0.5 * g.cell_volume * 12 * 0.5 * 4.0)
    rd[0][1, 1] = 0.0
    with pytest.raises(ValueError):
        weighted_kinetic_energy(g, rd, u)


def test_csv_round_trip(tmp_path):
    g = build_grid((2, 3))
    c = np.arange(6.0).reshape(2, 3) / 7.0
    write_cell_csv(tmp_path / "c.csv", g, {"c": c})
    rows = list(csv.DictReader(open(tmp_path / "c.csv")))
    assert len(rows) == 6
    assert np.array_equal([float(r["c"]) for r in rows], c.ravel())
    u = [np.arange(np.prod(g.face_shape(i)), dtype=float).reshape(g.face_shape(i)) / 3.0 for i in range(2)]
    write_face_csv(tmp_path / "f.csv", g, {"u": u})
    rows = list(csv.DictReader(open(tmp_path / "f.csv")))
    assert len(rows) == sum(np.prod(g.face_shape(i)) for i in range(2))
    vals = [float(r["u"]) for r in rows]
    assert np.array_equal(vals, np.concatenate([x.ravel() for x in u]))
