import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rbc.geometry import validate
from rbc.metrics import ClassParams, class_membership, enumerate_vertices
from rbc.qd import (CLASSES, QDClass, QDError, Dataset, binary_view, cell_times,
                    encode, gen_dataset, gen_hexagon, gen_random_polygon, gen_strip,
                    observation_point)
from rbc.verify import STRIP_PATTERNS, strip_pattern


def _vertices(p):
    return np.array([v.point for v in enumerate_vertices(p)])


def test_hexagon_with_zero_aperture_is_quadrilateral():
    cell = gen_hexagon(0.0, 1.0, seed=1)
    assert cell.geometry.n_facets == 4


@given(st.floats(0.01, 0.5), st.floats(0.5, 2.0), st.floats(0, 2 * math.pi), st.integers(0, 2**31))
def test_hexagon_shape(ratio, w, orient, seed):
    cell = gen_hexagon(ratio * w, w, orient, seed)
    V = _vertices(cell.geometry)
    assert len(V) == 6
    # centre-point symmetry
    for v in V:
        assert np.min(np.linalg.norm(V + v, axis=1)) < 1e-9
    V = V[np.argsort(np.arctan2(V[:, 1], V[:, 0]))]
    edges = np.sort(np.linalg.norm(np.roll(V, -1, 0) - V, axis=1))
    assert edges[:2] == pytest.approx([ratio * w] * 2)
    assert edges[-1] <= 1.2 * edges[2] + 1e-9


def test_hexagon_rejects_large_aperture():
    with pytest.raises(QDError):
        gen_hexagon(1.5, 1.0)


def test_strip_examples():
    cell = gen_strip(QDClass.C2_STRIP_SHALLOW, 1.0, seed=0)
    rep = validate(cell.geometry)
    assert rep.valid and not rep.bounded and cell.geometry.n_facets == 2
    assert np.allclose(cell.geometry.A[0], -cell.geometry.A[1])
    assert -0.5 < cell.slope < 0


@given(st.integers(0, 2**31))
def test_strip_slopes(seed):
    assert -2 < gen_strip(QDClass.C3_STRIP_MID, 1.0, seed).slope < -0.5
    assert gen_strip(QDClass.C4_STRIP_STEEP, 1.0, seed).slope < -2
    assert -0.5 < gen_strip(QDClass.C2_STRIP_SHALLOW, 1.0, seed).slope < 0


@given(st.integers(0, 2**31), st.sampled_from(["C2_STRIP_SHALLOW", "C3_STRIP_MID", "C4_STRIP_STEEP"]),
       st.floats(0, 2 * math.pi / 5))
def test_five_rays_on_a_strip(seed, cls, offset):
    rng = np.random.default_rng(seed)
    cell = gen_strip(QDClass(cls), rng.uniform(0.6, 1.4), seed)
    x = observation_point(cell, rng)
    t, hits = cell_times(cell, x, 5, math.inf, offset)
    assert strip_pattern(t, hits) in STRIP_PATTERNS


def test_random_polygon_membership():
    params = ClassParams(2, 2.0, 0.5, 2 * math.pi / 3)
    for seed in range(10):
        assert class_membership(gen_random_polygon(params, seed), params).member


def test_random_polygon_infeasible():
    with pytest.raises(QDError):
        gen_random_polygon(ClassParams(2, 1.0, 0.99, 0.1), 0, max_rejections=200)


def test_random_polygon_diversity():
    params = ClassParams(2, 2.0, 0.5, 2 * math.pi / 3)
    shapes = {tuple(np.round(gen_random_polygon(params, s).b, 6)) for s in range(100)}
    assert len(shapes) >= 90


def test_encode():
    assert np.allclose(encode(np.array([0.3, 5.0, np.inf]), 3.0), [0.1, 1.0, 1.0], rtol=0, atol=1e-15)


def test_dataset_examples():
    d = gen_dataset(20, 6, noise=0.0, seed=1)
    assert d.features.shape == (100, 6)
    assert np.all((d.features >= 0) & (d.features <= 1))
    assert np.array_equal(np.bincount(d.labels), [20] * 5)
    c5 = d.features[d.labels == CLASSES.index(QDClass.C5_OPEN)]
    assert np.all(c5 == 1.0)


def test_dataset_determinism_and_workers():
    a = gen_dataset(10, 6, seed=3)
    b = gen_dataset(10, 6, seed=3)
    c = gen_dataset(10, 6, seed=3, workers=2)
    assert np.array_equal(a.features, b.features) and np.array_equal(a.features, c.features)
    assert not np.array_equal(a.features, gen_dataset(10, 6, seed=4).features)


def test_dataset_jsonl_round_trip():
    d = gen_dataset(5, 6, seed=0)
    e = Dataset.from_jsonl(d.to_jsonl())
    assert np.array_equal(d.features, e.features) and np.array_equal(d.labels, e.labels)
    assert e.header() == d.header()


def test_binary_view():
    d = binary_view(gen_dataset(5, 6, seed=0))
    assert len(d) == 20 and d.classes == ["HEXAGON", "STRIP"]
    assert np.bincount(d.labels).tolist() == [5, 15]


def test_undetectable_aperture_is_invisible():
    # same seed: identical apex draws, so only the short edges differ
    closed = gen_hexagon(0.2, 1.0, 0.0, seed=5)
    open_ = gen_hexagon(0.2, 1.0, 0.0, seed=5)
    open_.aperture_detectable = False
    closed.aperture_detectable = True
    x = np.zeros(2)
    _, hits = cell_times(open_, x, 6, math.inf, 0.0)
    assert all(not set(h) & {0, 3} for h in hits)
    t_closed, _ = cell_times(closed, x, 6, math.inf, 0.0)
    assert np.all(np.isfinite(t_closed))
