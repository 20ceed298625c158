import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rbc.geometry import (ConvexPolytope, GeometryError, HalfSpace, Ray, contains,
                          exit_distances, is_interior, random_rotation, ray_exit,
                          validate)
from rbc.shapes import cube, regular_polygon, regular_simplex, strip, unit_square


def test_contains_examples():
    sq = unit_square()
    assert contains(sq, [0.5, 0.5], 0.0)
    assert not contains(sq, [1.5, 0.5], 0.0)
    assert contains(sq, [1.0, 0.5], 1e-9)


def test_contains_dimension_mismatch():
    with pytest.raises(GeometryError):
        contains(unit_square(), [0.5, 0.5, 0.5])


def test_ray_exit_axis_and_corner():
    sq = unit_square()
    rec = ray_exit(sq, Ray([0.5, 0.5], [1.0, 0.0]), 10)
    assert rec.t == pytest.approx(0.5)
    assert rec.facet_ids == (0,)  # x <= 1
    d = np.array([1.0, 1.0]) / math.sqrt(2)
    rec = ray_exit(sq, Ray([0.5, 0.5], d), 10)
    assert rec.t == pytest.approx(math.sqrt(2) / 2)
    assert set(rec.facet_ids) == {0, 1}


def test_ray_exit_escapes_half_plane():
    half = ConvexPolytope([[1.0, 0.0]], [1.0])
    rec = ray_exit(half, Ray([0.0, 0.0], [-1.0, 0.0]), 10)
    assert rec.t == math.inf and rec.facet_ids == ()


def test_cutoff_records_infinity():
    rec = ray_exit(unit_square(), Ray([0.5, 0.5], [1.0, 0.0]), 0.4)
    assert rec.t == math.inf and rec.facet_ids == ()


def test_origin_must_be_interior():
    with pytest.raises(GeometryError):
        ray_exit(unit_square(), Ray([1.0, 0.5], [1.0, 0.0]))


def test_validate_examples():
    rep = validate(unit_square())
    assert rep.valid and rep.bounded
    sq = unit_square()
    dup = ConvexPolytope(np.vstack([sq.A, sq.A[:1]]), np.append(sq.b, sq.b[0]))
    assert validate(dup).duplicates == [(0, 4)]
    rep = validate(ConvexPolytope([[0.0, 1.0], [0.0, -1.0]], [1.0, 0.0]))
    assert rep.valid and not rep.bounded


def test_validate_flags_redundant_and_empty():
    sq = unit_square()
    loose = ConvexPolytope(np.vstack([sq.A, [[1.0, 0.0]]]), np.append(sq.b, 5.0))
    assert validate(loose).redundant == [4]
    empty = ConvexPolytope([[1.0, 0.0], [-1.0, 0.0]], [0.0, -1.0])
    assert validate(empty).empty


def test_halfspace_and_file_normalisation():
    h = HalfSpace.from_raw([3.0, 4.0], 10.0)
    assert np.allclose(h.normal, [0.6, 0.8]) and h.offset == pytest.approx(2.0)
    p = ConvexPolytope.from_dict({"dim": 2, "halfspaces": [
        {"normal": [2.0, 0.0], "offset": 2.0}, {"normal": [0.0, 3.0], "offset": 3.0},
        {"normal": [-1.0, 0.0], "offset": 0.0}, {"normal": [0.0, -1.0], "offset": 0.0}]})
    assert np.allclose(p.b, [1, 1, 0, 0])
    q = ConvexPolytope.from_dict(p.to_dict())
    assert np.array_equal(q.A, p.A) and np.array_equal(q.b, p.b)


def test_file_dimension_mismatch():
    with pytest.raises(GeometryError):
        ConvexPolytope.from_dict({"dim": 3, "halfspaces": [{"normal": [1, 0], "offset": 1}]})


shapes = st.sampled_from(["square", "hexagon", "cube", "simplex3", "simplex4"])


def _shape(name):
    return {"square": unit_square(), "hexagon": regular_polygon(6),
            "cube": cube(3), "simplex3": regular_simplex(3),
            "simplex4": regular_simplex(4)}[name]


def _interior(p, rng):
    c = np.mean([p.b[i] * p.A[i] for i in range(p.n_facets)], axis=0) * 0
    while True:
        x = rng.uniform(-1.5, 1.5, size=p.dim) + c
        if is_interior(p, x, 1e-3):
            return x


@given(shapes, st.integers(0, 10**6))
def test_first_exit_is_first(name, seed):
    p = _shape(name)
    rng = np.random.default_rng(seed)
    x = _interior(p, rng)
    D = rng.normal(size=(20, p.dim))
    D /= np.linalg.norm(D, axis=1)[:, None]
    t, tight = exit_distances(p, x, D)
    assert np.all(np.isfinite(t)) and np.all(tight.sum(axis=1) >= 1)
    for ti, v in zip(t, D):
        s = np.linspace(0, ti, 200, endpoint=False)
        pts = x + s[:, None] * v
        assert np.all(pts @ p.A.T <= p.b + 1e-12)
        assert np.any((x + (ti + 1e-7) * v) @ p.A.T > p.b)


@given(shapes, st.integers(0, 10**6), st.floats(0.1, 10.0))
def test_scaling_scales_distances(name, seed, s):
    p = _shape(name)
    rng = np.random.default_rng(seed)
    x = _interior(p, rng)
    D = rng.normal(size=(10, p.dim))
    D /= np.linalg.norm(D, axis=1)[:, None]
    t, _ = exit_distances(p, x, D)
    t2, _ = exit_distances(p.transformed(scale=s), s * x, D)
    assert np.allclose(t2, s * t, rtol=1e-10)


@given(shapes, st.integers(0, 10**6))
def test_rigid_motion_invariance(name, seed):
    p = _shape(name)
    rng = np.random.default_rng(seed)
    x = _interior(p, rng)
    R = random_rotation(p.dim, rng)
    shift = rng.normal(size=p.dim)
    D = rng.normal(size=(10, p.dim))
    D /= np.linalg.norm(D, axis=1)[:, None]
    t, tight = exit_distances(p, x, D)
    q = p.transformed(rotation=R, translation=shift)
    t2, tight2 = exit_distances(q, R @ x + shift, D @ R.T)
    assert np.allclose(t, t2, rtol=1e-10)


def test_strip_escapes_along_its_lines():
    s = strip(0.0, 1.0)
    t, _ = exit_distances(s, [0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]])
    assert t[1] == math.inf and t[0] == pytest.approx(0.5)
