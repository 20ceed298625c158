import math

import pytest

from rbc.bounds import rays_2d
from rbc.metrics import ClassParams
from rbc.verify import (SHAPE_FAMILIES, falsify_theorem1, verify_qd, verify_theorem1,
                        verify_theorem2)

PARAMS = ClassParams(2, 2.0, 0.5, 2 * math.pi / 3)


def test_planar_hit_check_small_run():
    rep = verify_theorem1(40, PARAMS, seed=7)
    assert rep.passed and rep.rays == rays_2d(PARAMS).M
    assert rep.evaluations == 400 and rep.stats["min_edge_hits"] >= 2


def test_planar_report_is_deterministic():
    a = verify_theorem1(5, PARAMS, seed=3).to_dict()
    b = verify_theorem1(5, PARAMS, seed=3).to_dict()
    assert a == b and "timings" not in a


def test_planar_check_with_too_few_rays_fails():
    rep = verify_theorem1(40, PARAMS, seed=7, rays=5)
    assert not rep.passed and rep.violations


def test_near_extremal_quadrilateral_shows_bound_is_meaningful():
    M = rays_2d(PARAMS).M
    below = falsify_theorem1(PARAMS, M - 2, seed=1, offsets=1000)
    at = falsify_theorem1(PARAMS, M, seed=1, offsets=1000)
    assert below["member"] and below["failures"] > 0
    assert at["failures"] == 0


def test_literal_angle_rule_admits_counterexamples():
    rep = verify_theorem1(300, PARAMS, seed=7, angle_rule="max")
    assert not rep.passed


@pytest.mark.parametrize("family", ["cube3", "simplex3"])
def test_face_hit_check_small_families(family):
    rep = verify_theorem2(10, family, seed=11)
    assert rep.passed and rep.stats["min_face_hits"] >= SHAPE_FAMILIES[family].params.dim
    assert rep.rays <= rep.stats["count_bound"]


def test_qd_checks():
    assert verify_qd(60, seed=2).passed
