"""Randomized checks of the hit-count guarantees.

Every trial derives its own generator from ``(seed, trial)``, so reports do
not depend on the number of workers.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import qd, shapes
from .bounds import QDGeometry, greedy_count_bound, rays_2d, rays_qd
from .fingerprint import fingerprint, hit_report
from .geometry import ConvexPolytope, is_interior, random_rotation
from .metrics import ClassParams, class_membership, enumerate_vertices, theta_min
from .sphere import DirectionSet, place_greedy, place_uniform_circle

NEAR_OFFSETS = (1e-3, 1e-6)
MAX_LISTED = 20  # violations kept verbatim in a report


@dataclass
class VerificationReport:
    check: str
    seed: int
    trials: int
    evaluations: int
    rays: int
    violation_count: int = 0
    violations: list[dict] = field(default_factory=list)
    params: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)  # seconds; kept out of to_dict

    @property
    def passed(self) -> bool:
        return self.violation_count == 0

    def to_dict(self) -> dict:
        return {"check": self.check, "seed": self.seed, "trials": self.trials,
                "evaluations": self.evaluations, "rays": self.rays,
                "violation_count": self.violation_count, "passed": self.passed,
                "violations": self.violations, "params": self.params,
                "stats": self.stats}


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, trial]))


def _run(fn, jobs, workers: int, initializer=None, initargs=()):
    if workers > 1:
        with ProcessPoolExecutor(workers, initializer=initializer, initargs=initargs) as ex:
            return list(ex.map(fn, jobs, chunksize=max(1, len(jobs) // (8 * workers))))
    if initializer is not None:
        initializer(*initargs)
    return [fn(j) for j in jobs]


def uniform_interior(p: ConvexPolytope, rng: np.random.Generator,
                     inset: float = 0.0, tries: int = 100_000) -> np.ndarray:
    """Rejection sample from the bounding box of a bounded polytope."""
    V = np.array([v.point for v in enumerate_vertices(p)])
    lo, hi = V.min(axis=0), V.max(axis=0)
    margin = inset * float(np.max(hi - lo))
    for _ in range(tries):
        x = rng.uniform(lo, hi)
        if np.all(p.A @ x < p.b - margin):
            return x
    raise RuntimeError("could not sample an interior point")


def adversarial_points(p: ConvexPolytope, rng: np.random.Generator, scale: float
                       ) -> list[tuple[str, np.ndarray]]:
    """Points a relative distance ``NEAR_OFFSETS`` inside a vertex and an edge."""
    verts = enumerate_vertices(p)
    out = []
    for delta in NEAR_OFFSETS:
        v = verts[rng.integers(len(verts))].point
        toward = uniform_interior(p, rng) - v
        x = v + delta * scale * toward / np.linalg.norm(toward)
        out.append((f"vertex:{delta:g}", x))
    for delta in NEAR_OFFSETS:
        j = int(rng.integers(p.n_facets))
        ends = [v.point for v in verts if j in v.facets]
        u = rng.uniform(0.1, 0.9)
        x = (1 - u) * ends[0] + u * ends[1] - delta * scale * p.A[j]
        out.append((f"edge:{delta:g}", x))
    return out


# ------------------------------------------------------------ planar

def _thm1_trial(args) -> dict:
    seed, trial, params, M, n_random, angle_rule = args
    rng = trial_rng(seed, trial)
    poly = qd.gen_random_polygon(params, int(rng.integers(2**63)), angle_rule=angle_rule)
    scale = params.diameter_max
    T = 10.0 * params.diameter_max
    points = [("random", uniform_interior(poly, rng)) for _ in range(n_random)]
    points += adversarial_points(poly, rng, scale)
    bad, min_hits, evaluated = [], math.inf, 0
    for kind, x in points:
        if not is_interior(poly, x):
            continue
        offset = rng.uniform(0.0, 2.0 * math.pi / M)
        f = fingerprint(poly, x, place_uniform_circle(M, offset), T)
        rep = hit_report(f, poly)
        evaluated += 1
        min_hits = min(min_hits, rep.min_count)
        if rep.min_count < 2 or rep.max_count < 3:
            bad.append({"trial": trial, "point_kind": kind, "x_o": x.tolist(),
                        "offset": offset, "counts": rep.counts,
                        "polytope": poly.to_dict()})
    return {"violations": bad, "evaluated": evaluated, "min_hits": min_hits}


def verify_theorem1(trials: int, params: ClassParams, seed: int,
                    points_per_polygon: int = 10, rays: int | None = None,
                    workers: int = 1, angle_rule: str = "sine") -> VerificationReport:
    """Each edge >= 2 hits and some edge >= 3 for random class polygons.

    Per polygon, ``points_per_polygon - 4`` observation points are uniform
    and four are adversarial (near a vertex and near an edge). Every point
    gets its own random angular offset of the evenly spaced fan.
    """
    if params.dim != 2:
        raise ValueError("planar check needs dim == 2")
    t0 = time.perf_counter()
    M = rays if rays is not None else rays_2d(params).M
    n_random = max(0, points_per_polygon - 2 * len(NEAR_OFFSETS))
    jobs = [(seed, i, params, M, n_random, angle_rule) for i in range(trials)]
    results = _run(_thm1_trial, jobs, workers)
    viol = [v for r in results for v in r["violations"]]
    return VerificationReport(
        "thm1", seed, trials, sum(r["evaluated"] for r in results), M, len(viol),
        viol[:MAX_LISTED], dict(params.to_dict(), angle_rule=angle_rule),
        {"min_edge_hits": min(r["min_hits"] for r in results)},
        {"total": time.perf_counter() - t0})


def near_extremal_quadrilateral(params: ClassParams, slack: float = 0.9995
                                ) -> ConvexPolytope:
    """A class quadrilateral with a shortest edge seen almost edge-on.

    The edge of length ``l`` sits at the far end of a diagonal of length
    ``slack * d`` and meets its neighbour at exterior angle ``alpha``; from
    points near the opposite vertex it subtends close to the minimum span.
    """
    d, l, a = params.diameter_max, params.inscription_min, params.exterior_angle_max
    # |V - B| = slack * d with V = s (cos a, sin a), B = (l, 0)
    target = slack * d
    s = l * math.cos(a) + math.sqrt(target**2 - (l * math.sin(a)) ** 2)
    V = s * np.array([math.cos(a), math.sin(a)])
    C = np.array([l, 1.085 * V[1]])
    return ConvexPolytope.from_vertices_2d(np.array([[0.0, 0.0], [l, 0.0], C, V]))


def falsify_theorem1(params: ClassParams, rays: int, seed: int,
                     offsets: int = 2000, delta: float = 1e-3) -> dict:
    """Sweep fan offsets from a point near the far vertex of
    :func:`near_extremal_quadrilateral` and count hit-guarantee failures."""
    poly = near_extremal_quadrilateral(params)
    V = [v.point for v in enumerate_vertices(poly)]
    corner = np.array([params.inscription_min, 0.0])
    far = max(V, key=lambda v: np.linalg.norm(v - corner))  # end of the long diagonal
    centroid = np.mean(V, axis=0)
    x = far + delta * (centroid - far)
    rng = np.random.default_rng(seed)
    failures = 0
    for off in rng.uniform(0.0, 2.0 * math.pi / rays, size=offsets):
        f = fingerprint(poly, x, place_uniform_circle(rays, off), 10.0 * params.diameter_max)
        rep = hit_report(f, poly)
        failures += rep.min_count < 2 or rep.max_count < 3
    return {"rays": rays, "offsets": offsets, "failures": int(failures),
            "member": class_membership(poly, params).member,
            "polytope": poly.to_dict(), "x_o": x.tolist()}


# ------------------------------------------------------------ N-D

@dataclass(frozen=True)
class ShapeFamily:
    name: str
    params: ClassParams
    sample: Callable[[np.random.Generator], ConvexPolytope]


def _prism_sample(ks, radius, height, extra_dims):
    def sample(rng):
        k = int(rng.choice(ks))
        base = shapes.regular_polygon(k, rng.uniform(*radius), rng.uniform(0, 2 * math.pi))
        return shapes.prism(base, rng.uniform(*height, size=extra_dims))
    return sample


# declared class bounds cover every member of a family (checked per trial)
SHAPE_FAMILIES = {
    "cube3": ShapeFamily("cube3", ClassParams(3, math.sqrt(3.0), 1.0, math.pi / 2),
                         lambda rng: shapes.cube(3)),
    "prism3": ShapeFamily("prism3", ClassParams(3, 2.83, 0.8, 2 * math.pi / 3),
                          _prism_sample((3, 4, 5, 6), (0.8, 1.2), (0.8, 1.5), 1)),
    "simplex3": ShapeFamily("simplex3", ClassParams(3, 1.0, 1 / math.sqrt(3.0),
                                                    math.acos(-1 / 3)),
                            lambda rng: shapes.regular_simplex(3)),
    "cube4": ShapeFamily("cube4", ClassParams(4, 2.0, 1.0, math.pi / 2),
                         lambda rng: shapes.cube(4)),
    "prism4": ShapeFamily("prism4", ClassParams(4, 3.16, 0.9, 2 * math.pi / 3),
                          _prism_sample((3, 4, 6), (0.9, 1.1), (1.2, 1.6), 2)),
    "simplex4": ShapeFamily("simplex4", ClassParams(4, 1.0, 1 / math.sqrt(6.0),
                                                    math.acos(-1 / 4)),
                            lambda rng: shapes.regular_simplex(4)),
}

_DIRS: np.ndarray | None = None


def _set_dirs(D):
    global _DIRS
    _DIRS = D


def _thm2_trial(args) -> dict:
    seed, trial, family = args
    fam = SHAPE_FAMILIES[family]
    N = fam.params.dim
    rng = trial_rng(seed, trial)
    base = fam.sample(rng)
    member = class_membership(base, fam.params).member
    poly = base.transformed(rotation=random_rotation(N, rng),
                            translation=rng.uniform(-1, 1, size=N))
    x = uniform_interior(poly, rng)
    f = fingerprint(poly, x, DirectionSet(_DIRS), 10.0 * fam.params.diameter_max)
    rep = hit_report(f, poly, threshold=N)
    bad = []
    if not member or rep.facets_below:
        bad.append({"trial": trial, "member": member, "x_o": x.tolist(),
                    "counts": rep.counts, "polytope": poly.to_dict()})
    return {"violations": bad, "min_hits": rep.min_count}


def verify_theorem2(trials: int, family: str, seed: int,
                    directions: DirectionSet | None = None,
                    workers: int = 1) -> VerificationReport:
    """Every face hit at least N times by a greedy (theta_min/6)-dense set.

    The shapes come from ``SHAPE_FAMILIES[family]``, randomly rotated and
    translated, with a uniform observation point each.
    """
    fam = SHAPE_FAMILIES[family]
    t0 = time.perf_counter()
    phi = theta_min(fam.params) / 6.0
    if directions is None:
        directions = place_greedy(fam.params.dim, phi, seed)
    bound = greedy_count_bound(fam.params.dim, phi)
    placed = time.perf_counter() - t0
    jobs = [(seed, i, family) for i in range(trials)]
    results = _run(_thm2_trial, jobs, workers, _set_dirs, (directions.directions,))
    viol = [v for r in results for v in r["violations"]]
    size_ok = len(directions) <= bound
    if not size_ok:
        viol.append({"size": len(directions), "bound": bound})
    return VerificationReport(
        "thm2", seed, trials, trials, len(directions), len(viol), viol[:MAX_LISTED],
        dict(fam.params.to_dict(), family=family, phi=phi),
        {"min_face_hits": min(r["min_hits"] for r in results), "count_bound": bound},
        {"placement": placed, "total": time.perf_counter() - t0})


# ------------------------------------------------------------ QD

def strip_pattern(t: np.ndarray, hits) -> tuple[int, ...]:
    """Hits per line, sorted, followed by the number of escaping rays."""
    per = {}
    for h in hits:
        for fid in h:
            per[fid] = per.get(fid, 0) + 1
    return tuple(sorted(per.values())) + (int(np.sum(~np.isfinite(t))),)


STRIP_PATTERNS = {(2, 3, 0), (2, 2, 1)}


def _qd_trial(args) -> dict:
    seed, trial = args
    rng = trial_rng(seed, trial)
    bad = []
    # five rays across a strip
    cls = qd.STRIP_CLASSES[int(rng.integers(3))]
    cell = qd.gen_strip(cls, rng.uniform(0.6, 1.4), int(rng.integers(2**63)))
    x = qd.observation_point(cell, rng)
    t, hits = qd.cell_times(cell, x, 5, math.inf, rng.uniform(0, 2 * math.pi / 5))
    pattern = strip_pattern(t, hits)
    if pattern not in STRIP_PATTERNS:
        bad.append({"trial": trial, "check": "strip", "pattern": list(pattern),
                    "x_o": x.tolist(), "slope": cell.slope})
    # undetectable aperture: some joined long pair carries three rays
    w = rng.uniform(0.6, 1.4)
    a = w * rng.uniform(0.0, 0.5)
    cell = qd.gen_hexagon(a, w, rng.uniform(0, 2 * math.pi), int(rng.integers(2**63)))
    M = rays_qd(QDGeometry(a, w)).M
    x = qd.sample_interior(cell.geometry, rng, inset=0.0)
    _, hits = qd.cell_times(cell, x, M, math.inf, rng.uniform(0, 2 * math.pi / M))
    per_pair = [sum(1 for h in hits if set(h) & set(pair)) for pair in cell.long_pairs]
    if max(per_pair) < 3:
        bad.append({"trial": trial, "check": "hexagon", "a": a, "w": w, "M": M,
                    "pair_hits": per_pair, "x_o": x.tolist(),
                    "polytope": cell.geometry.to_dict()})
    return {"violations": bad}


def verify_qd(trials: int, seed: int, workers: int = 1) -> VerificationReport:
    """Strip hit patterns under five rays, and a triple-hit long pair in
    hexagons under the undetectable-aperture ray count."""
    t0 = time.perf_counter()
    results = _run(_qd_trial, [(seed, i) for i in range(trials)], workers)
    viol = [v for r in results for v in r["violations"]]
    return VerificationReport("qd", seed, trials, 2 * trials, 5, len(viol),
                              viol[:MAX_LISTED], {}, {}, {"total": time.perf_counter() - t0})
