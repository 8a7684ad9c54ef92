import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stein_poisson.point_process import PointConfiguration, TorusDomain
from stein_poisson.rgg import (NeighborGrid, brute_force_edges, count_edges, degree,
                               neighbor_pairs)


def cfg(pts):
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    return PointConfiguration(pts, 1.0, 0, TorusDomain(pts.shape[1]))


def test_examples():
    assert count_edges(cfg([[0.1, 0.1], [0.13, 0.14]]), 0.1) == 1
    assert count_edges(cfg([0.1, 0.2, 0.35]), 0.12) == 1
    assert count_edges(cfg([0.02, 0.97]), 0.1) == 1
    assert degree(cfg([0.1, 0.2, 0.35]), np.array([0.15]), 0.12) == 2


def test_empty_and_self_pair():
    empty = PointConfiguration(np.empty((0, 2)), 1.0, 0, TorusDomain(2))
    assert degree(empty, np.array([0.3, 0.3]), 0.2) == 0
    assert count_edges(empty, 0.2) == 0
    c = cfg([0.4, 0.45])
    assert degree(c, np.array([0.4]), 0.1) == 1  # coincident point excluded


@pytest.mark.parametrize("t", [0.0, -0.1, 0.5, 0.7])
def test_radius_validation(t):
    with pytest.raises(ValueError):
        count_edges(cfg([0.1, 0.2]), t)
    with pytest.raises(ValueError):
        degree(cfg([0.1, 0.2]), np.array([0.3]), t)


def test_grid_matches_brute_force_500_configs():
    gen = np.random.default_rng(11)
    for k in range(500):
        d = 1 + k % 3
        m = int(gen.integers(0, 201))
        t = float(gen.uniform(0.01, 0.49))
        pts = gen.random((m, d))
        expected = brute_force_edges(pts, t)
        assert count_edges(cfg(pts), t, method="grid") == expected
        assert count_edges(cfg(pts), t) == expected


def test_grid_buckets_partition_points():
    pts = np.random.default_rng(3).random((300, 2))
    grid = NeighborGrid(pts, 0.07)
    assert grid.cell_size >= 0.07
    members = np.concatenate(list(grid.buckets.values()))
    assert np.array_equal(np.sort(members), np.arange(300))


def test_neighbor_pairs_large_radius():
    pts = np.random.default_rng(4).random((80, 2))
    i, j, w = neighbor_pairs(pts, 0.6)
    gap = np.abs(pts[:, None] - pts[None])
    gap = np.minimum(gap, 1 - gap)
    dist = np.sqrt((gap ** 2).sum(-1))
    assert len(i) == int(np.sum(np.triu(dist <= 0.6, 1)))
    assert np.allclose(np.linalg.norm(w, axis=1), dist[i, j])


configs = st.integers(1, 3).flatmap(lambda d: st.tuples(
    st.lists(st.lists(st.floats(0, 1, exclude_max=True), min_size=d, max_size=d),
             min_size=0, max_size=40),
    st.lists(st.floats(0, 1, exclude_max=True), min_size=d, max_size=d),
    st.floats(0.01, 0.49), st.just(d)))


@given(configs)
def test_add_one_cost_identity(data):
    pts, z, t, d = data
    c = PointConfiguration(np.asarray(pts, dtype=float).reshape(-1, d), 1.0, 0, TorusDomain(d))
    z = np.asarray(z)
    assert count_edges(c.with_point(z), t) - count_edges(c, t) == degree(c, z, t)
    assert degree(c, z, t) == degree(c, z, t, method="brute")


@given(configs, st.floats(0.01, 0.49))
def test_monotone_in_radius(data, s):
    pts, _, t, d = data
    c = PointConfiguration(np.asarray(pts, dtype=float).reshape(-1, d), 1.0, 0, TorusDomain(d))
    lo, hi = sorted((t, s))
    assert count_edges(c, lo) <= count_edges(c, hi)
