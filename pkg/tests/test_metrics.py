import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rbc.geometry import ConvexPolytope, random_rotation
from rbc.metrics import (ClassParams, MetricsError, class_membership, compute_metrics,
                         diameter, edge_angular_spans, enumerate_vertices,
                         exterior_dihedral_angles, face_inscription_size, is_bounded,
                         polygon_vertices, theta_min, worst_case_span_2d)
from rbc.shapes import box, cube, regular_polygon, regular_simplex, strip, unit_square


def test_diameter_examples():
    assert diameter(unit_square()) == pytest.approx(math.sqrt(2))
    assert diameter(box([3.0, 0.1], center=[1.5, 0.05])) == pytest.approx(math.sqrt(9.01))
    assert diameter(strip(math.pi / 2, 1.0)) == math.inf
    assert not is_bounded(strip(0.0, 1.0))


def test_inscription_examples():
    sq = unit_square()
    assert all(face_inscription_size(sq, j) == pytest.approx(1.0) for j in range(4))
    c = cube(3)
    assert all(face_inscription_size(c, j) == pytest.approx(1.0, abs=1e-9) for j in range(6))
    s = 1.7
    t = regular_simplex(3, edge=s)
    for j in range(4):
        assert face_inscription_size(t, j) == pytest.approx(s / math.sqrt(3), abs=1e-9)


def test_exterior_angle_examples():
    assert all(a == pytest.approx(math.pi / 2) for a in exterior_dihedral_angles(unit_square()).values())
    hexa = exterior_dihedral_angles(regular_polygon(6))
    assert len(hexa) == 6 and all(a == pytest.approx(math.pi / 3) for a in hexa.values())
    cubes = exterior_dihedral_angles(cube(3))
    assert len(cubes) == 12 and all(a == pytest.approx(math.pi / 2) for a in cubes.values())


def test_simplex_dihedral():
    ang = exterior_dihedral_angles(regular_simplex(4))
    assert len(ang) == 10
    assert all(a == pytest.approx(math.acos(-1 / 4)) for a in ang.values())


@given(st.integers(3, 12), st.floats(0.0, 6.0))
def test_polygon_exterior_angles_sum(k, rot):
    ang = exterior_dihedral_angles(regular_polygon(k, rotation=rot))
    assert sum(ang.values()) == pytest.approx(2 * math.pi)


def test_theta_min_examples():
    assert theta_min(ClassParams(2, 2.0, 1.0, math.pi / 2)) == pytest.approx(math.pi / 6)
    assert theta_min(ClassParams(2, 1.0, 1.0, math.pi / 2)) == pytest.approx(math.pi / 2)
    assert theta_min(ClassParams(2, math.sqrt(2), 1.0, math.pi / 2)) == pytest.approx(math.pi / 4)


def test_class_params_validation():
    with pytest.raises(MetricsError):
        ClassParams(2, 1.0, 2.0, 1.0)
    with pytest.raises(MetricsError):
        ClassParams(2, 1.0, 0.5, math.pi)


def test_membership_examples():
    sq = unit_square()
    assert class_membership(sq, ClassParams(2, 1.5, 0.9, 1.6)).member
    rep = class_membership(sq, ClassParams(2, 1.2, 0.9, 1.6))
    assert not rep.member and not rep.criteria["diameter"]
    hexa = regular_polygon(6, circumradius=1.0)
    assert class_membership(hexa, ClassParams(2, 2.0, 1.0, math.pi / 3)).member


def test_vertices_of_square_and_cube():
    assert len(polygon_vertices(unit_square())) == 4
    verts = enumerate_vertices(cube(3))
    assert len(verts) == 8 and all(len(v.facets) == 3 for v in verts)


def test_metrics_bundle():
    m = compute_metrics(cube(3))
    assert m.diameter == pytest.approx(math.sqrt(3))
    assert len(m.inscriptions) == 6 and len(m.exterior_angles) == 12


@given(st.integers(0, 10**6))
def test_metrics_invariant_under_rigid_motion(seed):
    rng = np.random.default_rng(seed)
    p = regular_simplex(3, edge=1.3)
    q = p.transformed(rotation=random_rotation(3, rng), translation=rng.normal(size=3))
    assert diameter(q) == pytest.approx(diameter(p))
    assert face_inscription_size(q, 0) == pytest.approx(face_inscription_size(p, 0), abs=1e-9)
    assert sorted(exterior_dihedral_angles(q).values()) == pytest.approx(
        sorted(exterior_dihedral_angles(p).values()))


def test_edge_spans_cover_full_turn():
    spans = edge_angular_spans(regular_polygon(5), [0.1, -0.2])
    assert sum(spans.values()) == pytest.approx(2 * math.pi)


def test_worst_case_span_not_below_theta_min():
    p = regular_polygon(6)
    params = ClassParams(2, 2.0, 1.0, math.pi / 3)
    assert worst_case_span_2d(p) >= theta_min(params) - 1e-9
