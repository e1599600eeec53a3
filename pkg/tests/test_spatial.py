import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellcontext import CellLayout, ValidationError, cross_k, k_distance, location_k, multiscale_density
from cellcontext.spatial import SMALL_CLASS, concat_k, cross_k_matrix
from conftest import random_layout
from oracles import density_oracle, k_count_oracle, location_k_oracle

RADII8 = [0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.6, 0.9]


def test_single_pair_indicator():
    lay = CellLayout([[5.0, 5.0], [8.0, 9.0]], [0, 1], (0, 0, 10, 10), ["s", "t"])
    k = cross_k(lay, 0, 1, [1, 10])
    assert k.values.tolist() == [0.0, 100.0]
    assert not k.degenerate


def test_same_class_single_point_degenerate():
    lay = CellLayout([[5.0, 5.0]], [0], (0, 0, 10, 10), ["s"])
    k = cross_k(lay, 0, 0, [1, 2])
    assert k.degenerate
    assert k.values.tolist() == [0.0, 0.0]
    assert k.small_class


def test_strict_inequality_at_tie():
    lay = CellLayout([[0.0, 0.0], [3.0, 4.0]], [0, 1], (0, 0, 10, 10), ["s", "t"])
    assert cross_k(lay, 0, 1, [5.0, 5.000001]).values.tolist() == [0.0, 100.0]


def test_cross_k_random_3x4_oracle():
    rng = np.random.default_rng(11)
    xy = rng.uniform(0, 1, (7, 2))
    lay = CellLayout(xy, [0, 0, 0, 1, 1, 1, 1], (0, 0, 1, 1), ["s", "t"])
    got = cross_k(lay, 0, 1, RADII8).values.tolist()
    assert got == k_count_oracle(xy[:3].tolist(), xy[3:].tolist(), RADII8, 1.0, False)


def test_cross_k_matrix_matches_pairwise():
    rng = np.random.default_rng(3)
    lay = random_layout(rng, 40, 3)
    m = cross_k_matrix(lay, RADII8)
    for s in range(3):
        for t in range(3):
            assert m[s, t].tolist() == cross_k(lay, s, t, RADII8).values.tolist()


def test_cross_k_chunked_path_matches_oracle():
    # more points than one chunk so the chunked counting path runs
    rng = np.random.default_rng(5)
    xy = rng.uniform(0, 10, (2100, 2))
    lay = CellLayout(xy, [0] * 2100, (0, 0, 10, 10), ["a"])
    radii = [0.05, 0.2]
    got = cross_k(lay, 0, 0, radii).values
    d = np.sqrt(((xy[:, None, :] - xy[None, :, :]) ** 2).sum(-1))
    np.fill_diagonal(d, np.inf)
    want = [100.0 / (2100 * 2099) * int(np.count_nonzero(d < r)) for r in radii]
    assert got.tolist() == want


def test_location_k_single_indicator():
    lay = CellLayout([[2.0, 4.0]], [0], (0, 0, 4, 4), ["t"])
    assert location_k(lay, (2, 2), 0, [1, 3]).values.tolist() == [0.0, 16.0]


def test_location_k_empty_target():
    lay = CellLayout([[2.0, 4.0]], [0], (0, 0, 4, 4), ["s", "t"])
    k = location_k(lay, (2, 2), 1, [1, 3])
    assert k.degenerate and k.values.tolist() == [0.0, 0.0]


def test_location_k_random_oracle():
    rng = np.random.default_rng(2)
    lay = CellLayout(rng.uniform(0, 1, (10, 2)), [0] * 10, (0, 0, 1, 1), ["t"])
    x = (0.4, 0.6)
    assert location_k(lay, x, 0, RADII8).values.tolist() == location_k_oracle(x, lay.xy.tolist(), RADII8, 1.0)


def test_location_outside_domain():
    lay = CellLayout([[0.5, 0.5]], [0], (0, 0, 1, 1), ["t"])
    with pytest.raises(ValidationError):
        location_k(lay, (2, 2), 0, [0.1])


def test_density_at_single_cell():
    lay = CellLayout([[1.0, 1.0]], [0], (0, 0, 2, 2), ["a"])
    v = multiscale_density(lay, (1, 1), None, [1.0]).values
    assert v[0] == pytest.approx(1 / (2 * math.pi), abs=1e-12)
    assert v[0] == pytest.approx(0.159155, abs=1e-6)


def test_density_no_cells():
    lay = CellLayout(np.zeros((0, 2)), [], (0, 0, 2, 2), ["a"])
    assert multiscale_density(lay, (1, 1), None, [1, 2]).values.tolist() == [0.0, 0.0]


def test_density_random_oracle():
    rng = np.random.default_rng(9)
    lay = CellLayout(rng.uniform(0, 10, (5, 2)), [0, 1, 0, 1, 0], (0, 0, 10, 10), ["a", "b"])
    x = (3.0, 7.0)
    got = multiscale_density(lay, x, None, [1, 2, 4]).values
    assert np.allclose(got, density_oracle(x, lay.xy.tolist(), [1, 2, 4]), rtol=0, atol=1e-12)
    got_b = multiscale_density(lay, x, 1, [1, 2, 4]).values
    assert np.allclose(got_b, density_oracle(x, lay.points_of(1).tolist(), [1, 2, 4]), rtol=0, atol=1e-12)


def test_k_distance_examples():
    assert k_distance([0, 3, 4], [0, 0, 0]) == 5.0
    assert k_distance([1, 2], [1, 2]) == 0.0
    rng = np.random.default_rng(0)
    a, b = rng.random(12), rng.random(12)
    assert k_distance(a, b) == pytest.approx(math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b))), abs=1e-14)
    with pytest.raises(ValidationError):
        k_distance([1, 2], [1, 2, 3])


def test_concat_orders_by_target_class(annulus):
    v1 = location_k(annulus, (50, 50), 1, RADII8)
    v0 = location_k(annulus, (50, 50), 0, RADII8)
    assert concat_k([v1, v0]).tolist() == v0.values.tolist() + v1.values.tolist()


def test_small_class_threshold():
    assert SMALL_CLASS == 5


# ---------------------------------------------------------------------------
# properties


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 40), st.integers(1, 3))
def test_cross_k_monotone_in_radius(seed, n, c):
    lay = random_layout(np.random.default_rng(seed), n, c)
    m = cross_k_matrix(lay, [1, 5, 10, 20, 40, 80])
    assert np.all(np.diff(m, axis=2) >= 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 30), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_cross_k_translation_invariant(seed, n, tx, ty):
    lay = random_layout(np.random.default_rng(seed), n, 2)
    x0, y0, x1, y1 = lay.domain
    moved = lay.replace(xy=lay.xy + [tx, ty], domain=(x0 + tx, y0 + ty, x1 + tx, y1 + ty))
    a = cross_k(lay, 0, 1, RADII8[:4] + [20, 40]).values
    b = cross_k(moved, 0, 1, RADII8[:4] + [20, 40]).values
    # translation can flip a pair sitting exactly on a radius; random floats never do
    assert np.allclose(a, b, rtol=0, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 40))
def test_cross_k_symmetric_between_classes(seed, n):
    # the pair count is symmetric and so is area / (n_s n_t): K_s^t == K_t^s
    lay = random_layout(np.random.default_rng(seed), n, 2)
    ab = cross_k(lay, 0, 1, [5, 10, 30]).values
    ba = cross_k(lay, 1, 0, [5, 10, 30]).values
    assert np.array_equal(ab, ba)
    ns, nt = lay.counts()
    if ns and nt:
        counts = ab * ns * nt / lay.area
        assert np.allclose(counts, np.round(counts), atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 30))
def test_density_large_sigma_limit(seed, n):
    lay = random_layout(np.random.default_rng(seed), n, 1)
    sigma = 1e4 * math.hypot(lay.width, lay.height)
    v = multiscale_density(lay, (50, 50), None, [sigma]).values[0]
    assert v > 0
    assert v == pytest.approx(n / (2 * math.pi * sigma * sigma), rel=0.01)
