"""End-to-end acceptance checks, each at its stated tolerance and time budget.

Every check prints one PASS/FAIL line (also collected into the terminal
summary). A check that finishes over its budget fails even if its numbers
are right.
"""
import contextlib
import math
import time

import numpy as np
import pytest

from conftest import report_line
from rbc.bounds import QDGeometry, covering_count, rays_2d, rays_qd
from rbc.classify import TrainConfig, gradient_check, init_model, repeat_runs
from rbc.fingerprint import fingerprint, hit_report
from rbc.metrics import ClassParams, diameter, polygon_vertices
from rbc.qd import binary_view, gen_dataset, gen_random_polygon
from rbc.reconstruct import Ambiguity, reconstruct_2d
from rbc.shapes import unit_square
from rbc.sphere import (ball_area, ball_area_bounds, place_greedy, place_uniform_circle,
                        sphere_area, verify_density)
from rbc.verify import verify_theorem1, verify_theorem2

CLASS_2D = ClassParams(2, 2.0, 0.5, 2 * math.pi / 3)
DATA_SEED = 2024
RUN_SEED = 7


@contextlib.contextmanager
def criterion(label: str, budget: float, detail: dict):
    t0 = time.perf_counter()
    ok = False
    try:
        yield
        ok = True
    finally:
        elapsed = time.perf_counter() - t0
        in_time = elapsed < budget
        status = "PASS" if ok and in_time else "FAIL"
        extra = " ".join(f"{k}={v}" for k, v in detail.items())
        line = (f"{status} {label}: {elapsed:.1f}s (budget {budget:g}s)"
                + ("" if in_time else " OVER BUDGET") + (f" {extra}" if extra else ""))
        report_line(line)
    assert in_time, f"{label} took {elapsed:.1f}s, budget {budget:g}s"


def test_qd_ray_curve():
    detail = {}
    with criterion("qd ray-count curve over a/w in 0..0.5", 1, detail):
        Ms = [rays_qd(QDGeometry(r / 10, 1.0)).M for r in range(6)]
        detail["M"] = Ms
        assert Ms[0] == 6 and Ms[-1] == 9
        assert Ms == sorted(Ms) and min(Ms) == 6 and max(Ms) == 9


def test_planar_hit_guarantee():
    detail = {}
    with criterion("planar hit guarantee, 1000 polygons x 10 points", 60, detail):
        rep = verify_theorem1(1000, CLASS_2D, seed=RUN_SEED, points_per_polygon=10)
        detail.update(M=rep.rays, evaluations=rep.evaluations,
                      violations=rep.violation_count, min_edge_hits=rep.stats["min_edge_hits"])
        assert rep.evaluations == 10_000
        assert rep.violation_count == 0


def _max_pair_cos(D: np.ndarray) -> float:
    best = -2.0
    for s in range(0, len(D), 2048):
        G = D[s:s + 2048] @ D.T
        G[np.arange(G.shape[0]), np.arange(s, s + G.shape[0])] = -2.0
        best = max(best, float(G.max()))
    return best


def test_greedy_dense_sets():
    detail = {}
    with criterion("greedy dense sets, N in {2,3,4,6} x phi in {pi/3,pi/6,pi/12} x 10 runs",
                   300, detail):
        failures = []
        largest = 0
        for N in (2, 3, 4, 6):
            for k in (3, 6, 12):
                phi = math.pi / k
                bound = math.sqrt(2 * math.pi * N) / math.sin(phi / 2) ** (N - 1)
                for run in range(10):
                    P = place_greedy(N, phi, seed=run)
                    D = P.directions
                    largest = max(largest, len(D))
                    sep = math.acos(min(1.0, _max_pair_cos(D))) if len(D) > 1 else math.pi
                    rep = verify_density(P, phi, 100_000, seed=P.certificate.seed)
                    if not (sep > phi and len(D) <= bound and rep.n_uncovered == 0):
                        failures.append((N, k, run, sep, len(D), bound, rep.n_uncovered))
        detail.update(largest_set=largest, failures=len(failures))
        assert not failures, failures[:5]


@pytest.mark.parametrize("dim,budget", [(3, 600), (4, 1800)])
def test_face_hit_guarantee(dim, budget):
    detail = {}
    with criterion(f"face hit guarantee in R^{dim}, cube/prism/simplex x 100 trials",
                   budget, detail):
        bad = {}
        for shape in ("cube", "prism", "simplex"):
            rep = verify_theorem2(100, f"{shape}{dim}", seed=11)
            detail[shape] = f"rays:{rep.rays},min_hits:{rep.stats['min_face_hits']}"
            if rep.violation_count or rep.stats["min_face_hits"] < dim:
                bad[shape] = rep.violations
        assert not bad, bad


def _lines_recovered(poly, lines, scale, tol=1e-6):
    for a, b in zip(poly.A, poly.b):
        found = False
        for n, o in lines:
            ang = math.acos(max(-1.0, min(1.0, float(n @ a))))
            if ang < tol and abs(o - b) / scale < tol:
                found = True
                break
        if not found:
            return False
    return len(lines) == poly.n_facets


def test_reconstruction():
    detail = {}
    with criterion("planar reconstruction, 100 polygons plus two-hit square", 30, detail):
        rng = np.random.default_rng(RUN_SEED)
        M = rays_2d(CLASS_2D).M
        failed = []
        for i in range(100):
            poly = gen_random_polygon(CLASS_2D, seed=1000 + i)
            V = polygon_vertices(poly)
            x = rng.dirichlet(np.ones(len(V))) @ V
            f = fingerprint(poly, x, place_uniform_circle(M, rng.uniform(0, 2 * math.pi / M)),
                            10 * CLASS_2D.diameter_max)
            rec = reconstruct_2d(f)
            if rec.ambiguity is not Ambiguity.UNIQUE or not _lines_recovered(
                    poly, rec.edge_lines, diameter(poly)):
                failed.append(i)
        sq = unit_square()
        f = fingerprint(sq, [0.5, 0.5], place_uniform_circle(8, math.pi / 8), 10)
        square = reconstruct_2d(f).ambiguity
        detail.update(M=M, failed=len(failed), square=square.value,
                      square_max_hits=hit_report(f, sq).max_count)
        assert not failed, failed
        assert square is Ambiguity.PRIMAL_DUAL_AMBIGUOUS


@pytest.fixture(scope="module")
def headline_data():
    return binary_view(gen_dataset(1000, 6, noise=0.03, aperture_detectable=False,
                                   seed=DATA_SEED))


def test_classifier_experiment(headline_data):
    detail = {}
    with criterion("hexagon-vs-strip classifier, 50 runs", 900, detail):
        rep = repeat_runs(50, headline_data, TrainConfig(), seed=RUN_SEED)
        beats = [a > b for a, b in zip(rep.accuracies, rep.baseline_accuracies)]
        detail.update(mean=f"{rep.mean:.4f}", std=f"{rep.std:.4f}",
                      min=f"{min(rep.accuracies):.4f}",
                      centroid_mean=f"{np.mean(rep.baseline_accuracies):.4f}",
                      mlp_wins=f"{sum(beats)}/50")
        assert rep.mean >= 0.93
        assert rep.std <= 0.02
        assert all(beats)


def test_gradient_check(headline_data):
    detail = {}
    with criterion("backprop vs central differences, 100 probes", 10, detail):
        m = init_model([6, 128, 64, 32, 2], seed=RUN_SEED)
        errs = gradient_check(m, headline_data.features, headline_data.labels,
                              probes=100, seed=RUN_SEED)
        detail["max_rel_err"] = f"{max(errs):.2e}"
        assert len(errs) == 100 and max(errs) < 1e-5


def test_area_identities():
    detail = {}
    with criterion("ball/sphere area identity and cap-area sandwich", 5, detail):
        worst = max(abs(ball_area(N, math.pi) / sphere_area(N) - 1) for N in range(2, 17))
        detail["worst_rel"] = f"{worst:.1e}"
        assert worst < 1e-9
        grid = np.linspace(0.0, math.pi / 2, 41)[1:]
        for N in range(2, 17):
            for r in grid:
                lo, hi = ball_area_bounds(N, r)
                a = ball_area(N, r)
                assert lo < a, (N, r)
                if N == 2:
                    assert a <= hi * (1 + 1e-12), (N, r)
                else:
                    assert a < hi, (N, r)


def test_covering_count_inequality():
    detail = {}
    with criterion("covering count exceeds dimension, N in 3..64", 1, detail):
        grid = np.linspace(0.0, math.pi / 2, 201)[1:]
        margin = min(covering_count(N, th) - N for N in range(3, 65) for th in grid)
        detail["min_margin"] = f"{margin:.3f}"
        assert margin > 0
