"""Class parameters of convex polytopes: diameter, face inscription size and
exterior dihedral angles, plus membership in the class they define."""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import TIGHT_TOL, ConvexPolytope, recession_direction
from .lp import UNBOUNDED, linprog_max


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class ClassParams:
    """Bounds (d, l, alpha) defining a polytope class in dimension ``dim``.

    ``diameter_max`` bounds the diameter, ``inscription_min`` the face
    inscription sizes, ``exterior_angle_max`` the exterior dihedral angles
    (radians).
    """

    dim: int
    diameter_max: float
    inscription_min: float
    exterior_angle_max: float

    def __post_init__(self):
        d, l, a = self.diameter_max, self.inscription_min, self.exterior_angle_max
        if int(self.dim) != self.dim or self.dim < 2:
            raise MetricsError("dim must be an integer >= 2")
        if not (d > 0 and l > 0 and 0 < a < math.pi):
            raise MetricsError("need d > 0, l > 0 and 0 < alpha < pi")
        if l > d:
            raise MetricsError("inscription size cannot exceed the diameter")

    def to_dict(self) -> dict:
        return {"dim": self.dim, "d": self.diameter_max, "l": self.inscription_min,
                "alpha": self.exterior_angle_max}


def theta_min(params: ClassParams) -> float:
    """Smallest angular span of a face over the class: arcsin((l/d) sin alpha)."""
    ratio = params.inscription_min / params.diameter_max
    return math.asin(min(1.0, ratio * math.sin(params.exterior_angle_max)))


# ---------------------------------------------------------------- vertices

@dataclass(frozen=True)
class Vertex:
    point: np.ndarray
    facets: tuple[int, ...]  # row indices of tight half-spaces


def enumerate_vertices(p: ConvexPolytope, tol: float = TIGHT_TOL,
                       max_combinations: int = 2_000_000) -> list[Vertex]:
    """All vertices by N-wise hyperplane intersection with feasibility filtering.

    Cost grows like C(#facets, N); fine for the small shapes used here.
    """
    n, m = p.dim, p.n_facets
    n_comb = math.comb(m, n)
    if n_comb > max_combinations:
        raise MetricsError(f"{n_comb} facet combinations exceed the enumeration limit")
    if n > 3 and n_comb > 50_000:
        warnings.warn("vertex enumeration in high dimension is combinatorial; "
                      "this may be slow", RuntimeWarning, stacklevel=2)
    found: list[np.ndarray] = []
    for combo in itertools.combinations(range(m), n):
        A = p.A[list(combo)]
        if abs(np.linalg.det(A)) < 1e-12:
            continue
        x = np.linalg.solve(A, p.b[list(combo)])
        if np.all(p.A @ x <= p.b + tol):
            if not any(np.max(np.abs(x - y)) <= 1e-9 for y in found):
                found.append(x)
    out = []
    for x in found:
        tight = tuple(int(j) for j in np.flatnonzero(np.abs(p.A @ x - p.b) <= tol))
        out.append(Vertex(x, tight))
    return out


def is_bounded(p: ConvexPolytope) -> bool:
    if p.dim == 2:
        ang = np.sort(np.arctan2(p.A[:, 1], p.A[:, 0]))
        gaps = np.diff(np.append(ang, ang[0] + 2 * math.pi))
        return bool(gaps.max() < math.pi - 1e-12)
    return recession_direction(p) is None


def polygon_vertices(p: ConvexPolytope) -> np.ndarray:
    """Vertices of a bounded polygon in counter-clockwise order."""
    if p.dim != 2:
        raise MetricsError("polygon_vertices needs dim == 2")
    V = np.array([v.point for v in enumerate_vertices(p)])
    if V.shape[0] < 3:
        raise MetricsError("polygon has fewer than three vertices")
    c = V.mean(axis=0)
    order = np.argsort(np.arctan2(V[:, 1] - c[1], V[:, 0] - c[0]))
    return V[order]


def diameter(p: ConvexPolytope) -> float:
    if not is_bounded(p):
        return math.inf
    V = np.array([v.point for v in enumerate_vertices(p)])
    diff = V[:, None, :] - V[None, :, :]
    return float(np.sqrt((diff ** 2).sum(-1)).max())


# ------------------------------------------------------- facet inscription

def _hyperplane_basis(normal: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of the complement of ``normal``."""
    _, _, vt = np.linalg.svd(normal[None, :])
    return vt[1:].T


def facet_chebyshev(p: ConvexPolytope, j: int) -> tuple[float, np.ndarray | None]:
    """Radius and center of the largest (N-1)-ball inside facet row ``j``.

    Solved as a linear program in an orthonormal chart of the facet's
    hyperplane. Returns ``(inf, None)`` for unbounded facets.
    """
    n_j, b_j = p.A[j], p.b[j]
    B = _hyperplane_basis(n_j)
    x0 = b_j * n_j
    rows, rhs = [], []
    for i in range(p.n_facets):
        if i == j:
            continue
        proj = B.T @ p.A[i]
        scale = np.linalg.norm(proj)
        room = p.b[i] - p.A[i] @ x0
        if scale < 1e-12:
            if room < -TIGHT_TOL:
                return -math.inf, None  # hyperplane misses the polytope
            continue
        rows.append(np.append(proj, scale))
        rhs.append(room)
    c = np.zeros(p.dim)
    c[-1] = 1.0
    if not rows:
        return math.inf, None
    res = linprog_max(c, np.array(rows), np.array(rhs))
    if res.status == UNBOUNDED:
        return math.inf, None
    if not res.ok:
        return -math.inf, None
    y, r = res.x[:-1], res.x[-1]
    return float(r), x0 + B @ y


def _polygon_edge_lengths(p: ConvexPolytope) -> dict[int, float]:
    verts = enumerate_vertices(p)
    lengths = {}
    for j, fid in enumerate(p.facet_ids):
        on = [v.point for v in verts if j in v.facets]
        if len(on) >= 2:
            lengths[fid] = float(max(np.linalg.norm(a - b)
                                     for a, b in itertools.combinations(on, 2)))
        elif on or not is_bounded(p):
            lengths[fid] = math.inf if len(on) <= 1 and not is_bounded(p) else 0.0
        else:
            lengths[fid] = 0.0
    return lengths


def face_inscription_size(p: ConvexPolytope, facet_id: int) -> float:
    """Diameter of the largest (N-1)-disk inscribed in a facet.

    Edge length for polygons; twice the in-hyperplane Chebyshev radius
    otherwise. ``inf`` flags an unbounded facet.
    """
    j = p.index_of(facet_id)
    if p.dim == 2:
        length = _polygon_edge_lengths(p)[facet_id]
        if length <= TIGHT_TOL:
            raise MetricsError(f"facet {facet_id} is degenerate")
        return length
    r, _ = facet_chebyshev(p, j)
    if r <= TIGHT_TOL:
        raise MetricsError(f"facet {facet_id} is degenerate")
    return 2.0 * r


# ------------------------------------------------------ adjacency / angles

def ridge_slack(p: ConvexPolytope, i: int, j: int, cap: float = 1.0) -> float:
    """Largest slack of the remaining constraints at a point tight on rows
    ``i`` and ``j``; positive iff the two facets share an (N-2)-ridge."""
    n = p.dim
    others = [k for k in range(p.n_facets) if k not in (i, j)]
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A_ub = np.zeros((len(others) + 1, n + 1))
    A_ub[:-1, :n] = p.A[others]
    A_ub[:-1, -1] = 1.0
    A_ub[-1, -1] = 1.0
    b_ub = np.append(p.b[others], cap)
    A_eq = np.zeros((2, n + 1))
    A_eq[0, :n], A_eq[1, :n] = p.A[i], p.A[j]
    res = linprog_max(c, A_ub, b_ub, A_eq, [p.b[i], p.b[j]])
    return res.value if res.ok else -math.inf


def adjacent_pairs(p: ConvexPolytope) -> list[tuple[int, int]]:
    """Row-index pairs of facets sharing a ridge."""
    pairs = []
    if p.dim == 2:
        for v in enumerate_vertices(p):
            if len(v.facets) == 2:
                pairs.append(tuple(sorted(v.facets)))
        return sorted(set(pairs))
    for i, j in itertools.combinations(range(p.n_facets), 2):
        if abs(p.A[i] @ p.A[j]) > 1.0 - 1e-12:
            continue
        if ridge_slack(p, i, j) > TIGHT_TOL:
            pairs.append((i, j))
    return pairs


def exterior_dihedral_angles(p: ConvexPolytope) -> dict[tuple[int, int], float]:
    """Turning angle between outward normals, keyed by adjacent facet-id pairs."""
    out = {}
    for i, j in adjacent_pairs(p):
        ang = float(np.arccos(np.clip(p.A[i] @ p.A[j], -1.0, 1.0)))
        out[(p.facet_ids[i], p.facet_ids[j])] = ang
    return out


# ----------------------------------------------------------- aggregation

@dataclass
class PolytopeMetrics:
    diameter: float
    inscriptions: dict[int, float]
    exterior_angles: dict[tuple[int, int], float]

    def to_dict(self) -> dict:
        return {"diameter": self.diameter,
                "inscriptions": {str(k): v for k, v in self.inscriptions.items()},
                "exterior_angles": [{"pair": list(k), "angle": v}
                                    for k, v in self.exterior_angles.items()]}


def compute_metrics(p: ConvexPolytope) -> PolytopeMetrics:
    if p.dim == 2:
        inscriptions = _polygon_edge_lengths(p)
    else:
        inscriptions = {fid: 2.0 * facet_chebyshev(p, j)[0]
                        for j, fid in enumerate(p.facet_ids)}
    return PolytopeMetrics(diameter(p), inscriptions, exterior_dihedral_angles(p))


@dataclass
class MembershipReport:
    member: bool
    criteria: dict[str, bool] = field(default_factory=dict)
    metrics: PolytopeMetrics | None = None


ANGLE_RULES = ("sine", "max")


def class_membership(p: ConvexPolytope, params: ClassParams, angle_rule: str = "sine",
                     tol: float = 1e-9, metrics: PolytopeMetrics | None = None
                     ) -> MembershipReport:
    """Check ``p`` against the class bounds.

    ``angle_rule="max"`` tests only ``max exterior angle <= alpha``.
    ``angle_rule="sine"`` (default) additionally requires
    ``sin(angle) >= sin(alpha)`` at every ridge, which is what the
    law-of-sines span bound actually consumes: near-flat ridges (tiny
    exterior angles) make some face look arbitrarily thin from points close
    to a neighbouring vertex.
    """
    if angle_rule not in ANGLE_RULES:
        raise MetricsError(f"angle_rule must be one of {ANGLE_RULES}")
    if p.dim != params.dim:
        raise MetricsError("polytope and class dimensions differ")
    m = metrics or compute_metrics(p)
    angles = list(m.exterior_angles.values())
    alpha = params.exterior_angle_max
    crit = {
        "diameter": m.diameter <= params.diameter_max + tol,
        "inscription": bool(m.inscriptions)
        and min(m.inscriptions.values()) >= params.inscription_min - tol,
        "exterior_angle_max": bool(angles) and max(angles) <= alpha + tol,
    }
    if angle_rule == "sine":
        crit["exterior_angle_sine"] = bool(angles) and (
            min(math.sin(a) for a in angles) >= math.sin(alpha) - tol)
    return MembershipReport(all(crit.values()), crit, m)


# ------------------------------------------------------ planar spans

def edge_angular_spans(p: ConvexPolytope, x) -> dict[int, float]:
    """Angle subtended at ``x`` by each bounded edge of a polygon."""
    x = np.asarray(x, dtype=float)
    verts = enumerate_vertices(p)
    spans = {}
    for j, fid in enumerate(p.facet_ids):
        on = [v.point for v in verts if j in v.facets]
        if len(on) != 2:
            continue
        u, w = on[0] - x, on[1] - x
        cosang = u @ w / (np.linalg.norm(u) * np.linalg.norm(w))
        spans[fid] = float(np.arccos(np.clip(cosang, -1.0, 1.0)))
    return spans


def worst_case_span_2d(p: ConvexPolytope) -> float:
    """Infimum over interior points and edges of the edge's angular span.

    The subtended angle is quasi-concave on the polygon, so the infimum is
    reached at vertices: the exterior angle at an edge's own endpoints, or
    the angle the edge subtends at a non-incident vertex.
    """
    verts = enumerate_vertices(p)
    best = math.inf
    for j in range(p.n_facets):
        ends = [v for v in verts if j in v.facets]
        if len(ends) != 2:
            continue
        a, b = ends[0].point, ends[1].point
        for v in verts:
            if j in v.facets:
                other = [k for k in v.facets if k != j]
                for k in other:
                    ang = math.acos(max(-1.0, min(1.0, p.A[j] @ p.A[k])))
                    best = min(best, ang)
                continue
            u, w = a - v.point, b - v.point
            cosang = u @ w / (np.linalg.norm(u) * np.linalg.norm(w))
            best = min(best, math.acos(max(-1.0, min(1.0, cosang))))
    return best
