"""Half-space polytopes, rays and exact first-exit queries."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .lp import linprog_max

TIGHT_TOL = 1e-9
INTERIOR_MARGIN = 1e-12
DUPLICATE_TOL = 1e-9
UNIT_TOL = 1e-12


class GeometryError(ValueError):
    """Invalid geometric input (dimension mismatch, non-interior origin, ...)."""


def as_vector(x, dim: int | None = None) -> np.ndarray:
    v = np.asarray(x, dtype=float).ravel()
    if v.size < 2:
        raise GeometryError(f"vectors need dimension >= 2, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise GeometryError("vector has non-finite coordinates")
    if dim is not None and v.size != dim:
        raise GeometryError(f"dimension mismatch: expected {dim}, got {v.size}")
    return v


def unit(x) -> np.ndarray:
    v = as_vector(x)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise GeometryError("cannot normalize the zero vector")
    return v / norm


def check_unit(v: np.ndarray) -> np.ndarray:
    v = as_vector(v)
    if abs(np.linalg.norm(v) - 1.0) > UNIT_TOL:
        raise GeometryError("direction is not a unit vector")
    return v


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = as_vector(self.origin)
        d = check_unit(self.direction)
        if o.size != d.size:
            raise GeometryError("ray origin and direction differ in dimension")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)

    def at(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction


@dataclass(frozen=True)
class HalfSpace:
    """The set ``{x : <x, normal> <= offset}`` with a unit outward normal."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        object.__setattr__(self, "normal", check_unit(self.normal))
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def from_raw(cls, normal, offset: float) -> "HalfSpace":
        """Normalize ``normal`` and rescale ``offset`` to match."""
        n = as_vector(normal)
        norm = np.linalg.norm(n)
        if norm == 0.0:
            raise GeometryError("half-space normal is zero")
        return cls(n / norm, float(offset) / norm)


@dataclass(frozen=True)
class ExitRecord:
    t: float
    facet_ids: tuple[int, ...]

    @property
    def finite(self) -> bool:
        return math.isfinite(self.t)


@dataclass(frozen=True, eq=False)
class ConvexPolytope:
    """Intersection of half-spaces in R^N, stored as ``A x <= b``.

    ``A`` has unit rows. ``facet_ids`` are stable integer labels, one per row;
    they survive transformations so hit counts can be compared against the
    generating shape.
    """

    A: np.ndarray
    b: np.ndarray
    facet_ids: tuple[int, ...] = field(default=())

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        if A.shape[0] != b.size:
            raise GeometryError("A and b disagree on the number of half-spaces")
        if A.shape[1] < 2:
            raise GeometryError("polytopes live in dimension >= 2")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise GeometryError("non-finite half-space data")
        norms = np.linalg.norm(A, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_TOL):
            raise GeometryError("half-space normals must be unit vectors")
        ids = tuple(int(i) for i in self.facet_ids) or tuple(range(b.size))
        if len(ids) != b.size or len(set(ids)) != len(ids):
            raise GeometryError("facet_ids must be unique, one per half-space")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "facet_ids", ids)

    @classmethod
    def from_halfspaces(cls, halfspaces: Iterable[HalfSpace],
                        facet_ids: Sequence[int] | None = None) -> "ConvexPolytope":
        hs = list(halfspaces)
        if not hs:
            raise GeometryError("need at least one half-space")
        A = np.array([h.normal for h in hs])
        b = np.array([h.offset for h in hs])
        return cls(A, b, tuple(facet_ids) if facet_ids is not None else ())

    @classmethod
    def from_raw(cls, normals, offsets, facet_ids: Sequence[int] | None = None
                 ) -> "ConvexPolytope":
        """Build from possibly non-normalized normals."""
        A = np.atleast_2d(np.asarray(normals, dtype=float))
        b = np.asarray(offsets, dtype=float).ravel()
        norms = np.linalg.norm(A, axis=1)
        if np.any(norms == 0.0):
            raise GeometryError("half-space normal is zero")
        return cls(A / norms[:, None], b / norms,
                   tuple(facet_ids) if facet_ids is not None else ())

    @classmethod
    def from_vertices_2d(cls, vertices) -> "ConvexPolytope":
        """Polygon from vertices listed counter-clockwise."""
        V = np.asarray(vertices, dtype=float)
        edges = np.roll(V, -1, axis=0) - V
        normals = np.column_stack([edges[:, 1], -edges[:, 0]])
        return cls.from_raw(normals, np.einsum("ij,ij->i", normals, V))

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def n_facets(self) -> int:
        return self.b.size

    def halfspaces(self) -> list[HalfSpace]:
        return [HalfSpace(a, o) for a, o in zip(self.A, self.b)]

    def index_of(self, facet_id: int) -> int:
        return self.facet_ids.index(facet_id)

    def without(self, facet_ids: Iterable[int]) -> "ConvexPolytope":
        drop = set(facet_ids)
        keep = [i for i, f in enumerate(self.facet_ids) if f not in drop]
        return ConvexPolytope(self.A[keep], self.b[keep],
                              tuple(self.facet_ids[i] for i in keep))

    # rigid motions and scaling act on the H-representation directly
    def transformed(self, rotation=None, scale: float = 1.0,
                    translation=None) -> "ConvexPolytope":
        """Image under ``x -> scale * R x + t``."""
        A, b = self.A, self.b * scale
        if rotation is not None:
            A = A @ np.asarray(rotation, dtype=float).T
        if translation is not None:
            b = b + A @ np.asarray(translation, dtype=float)
        A = A / np.linalg.norm(A, axis=1)[:, None]
        return ConvexPolytope(A, b, self.facet_ids)

    def to_dict(self) -> dict:
        out = {"dim": self.dim,
               "halfspaces": [{"normal": a.tolist(), "offset": float(o)}
                              for a, o in zip(self.A, self.b)]}
        if self.facet_ids != tuple(range(self.n_facets)):
            out["facet_ids"] = list(self.facet_ids)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ConvexPolytope":
        dim = int(data["dim"])
        hs = data["halfspaces"]
        normals = [h["normal"] for h in hs]
        if any(len(n) != dim for n in normals):
            raise GeometryError("half-space normal does not match 'dim'")
        return cls.from_raw(normals, [h["offset"] for h in hs],
                            data.get("facet_ids"))


def contains(p: ConvexPolytope, x, tol: float = 0.0) -> bool:
    x = as_vector(x, p.dim)
    return bool(np.all(p.A @ x <= p.b + tol))


def is_interior(p: ConvexPolytope, x, margin: float = INTERIOR_MARGIN) -> bool:
    return contains(p, x, -margin)


def exit_distances(p: ConvexPolytope, origin, directions, cutoff: float = math.inf,
                   tight_tol: float = TIGHT_TOL):
    """Vectorized first-exit query for a bundle of rays from one origin.

    Returns ``(t, tight)`` where ``t[i]`` is the exit distance of direction
    ``i`` (``inf`` past ``cutoff`` or when the ray never leaves) and
    ``tight[i, j]`` marks facet ``j`` as tight at the exit point.
    """
    x = as_vector(origin, p.dim)
    D = np.atleast_2d(np.asarray(directions, dtype=float))
    if D.shape[1] != p.dim:
        raise GeometryError("direction dimension does not match polytope")
    if cutoff <= 0:
        raise GeometryError("cutoff must be positive")
    slack = p.b - p.A @ x
    if np.any(slack <= INTERIOR_MARGIN):
        raise GeometryError("ray origin is not strictly inside the polytope")
    den = D @ p.A.T
    with np.errstate(divide="ignore", invalid="ignore"):
        cand = np.where(den > 0.0, slack[None, :] / den, np.inf)
    t = cand.min(axis=1)
    finite = np.isfinite(t) & (t <= cutoff)
    t = np.where(finite, t, np.inf)
    hit = x[None, :] + np.where(finite, t, 0.0)[:, None] * D
    resid = np.abs(hit @ p.A.T - p.b[None, :])
    tight = (resid <= tight_tol) & finite[:, None]
    return t, tight


def ray_exit(p: ConvexPolytope, ray: Ray, cutoff: float = math.inf) -> ExitRecord:
    t, tight = exit_distances(p, ray.origin, ray.direction[None, :], cutoff)
    ids = tuple(p.facet_ids[j] for j in np.flatnonzero(tight[0]))
    return ExitRecord(float(t[0]), ids)


@dataclass
class ValidationReport:
    duplicates: list[tuple[int, int]]
    redundant: list[int]
    empty: bool
    bounded: bool
    recession_direction: list[float] | None = None

    @property
    def valid(self) -> bool:
        return not (self.duplicates or self.redundant or self.empty)


def facet_witness_slack(p: ConvexPolytope, j: int, cap: float = 1.0,
                        exclude: Iterable[int] = ()) -> float:
    """Largest ``s`` such that some point on facet ``j``'s hyperplane satisfies
    every other constraint with slack ``s`` (capped at ``cap``).

    Positive means the hyperplane meets the polytope in a relatively open
    (N-1)-dimensional set. ``-inf`` when the hyperplane misses the polytope.
    """
    n = p.dim
    skip = set(exclude) | {j}
    others = [i for i in range(p.n_facets) if i not in skip]
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A_ub = np.zeros((len(others) + 1, n + 1))
    A_ub[:-1, :n] = p.A[others]
    A_ub[:-1, -1] = 1.0
    A_ub[-1, -1] = 1.0
    b_ub = np.append(p.b[others], cap)
    A_eq = np.append(p.A[j], 0.0)[None, :]
    res = linprog_max(c, A_ub, b_ub, A_eq, [p.b[j]])
    return res.value if res.ok else -math.inf


def chebyshev_slack(p: ConvexPolytope, cap: float = 1.0) -> tuple[float, np.ndarray | None]:
    """Radius and center of the largest ball inside ``p`` (radius capped)."""
    n = p.dim
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A_ub = np.hstack([p.A, np.ones((p.n_facets, 1))])
    A_ub = np.vstack([A_ub, np.eye(1, n + 1, n)])
    b_ub = np.append(p.b, cap)
    res = linprog_max(c, A_ub, b_ub)
    if not res.ok:
        return -math.inf, None
    return res.value, res.x[:n]


def recession_direction(p: ConvexPolytope) -> np.ndarray | None:
    """A nonzero ``v`` with ``A v <= 0`` if one exists, else ``None``."""
    n = p.dim
    A_ub = np.vstack([p.A, np.eye(n), -np.eye(n)])
    b_ub = np.concatenate([np.zeros(p.n_facets), np.ones(2 * n)])
    for k in range(n):
        for sign in (1.0, -1.0):
            c = np.zeros(n)
            c[k] = sign
            res = linprog_max(c, A_ub, b_ub)
            if res.ok and res.value > 1e-9:
                return res.x / np.linalg.norm(res.x)
    return None


def validate(p: ConvexPolytope) -> ValidationReport:
    dups = []
    for i in range(p.n_facets):
        for j in range(i + 1, p.n_facets):
            if (np.max(np.abs(p.A[i] - p.A[j])) <= DUPLICATE_TOL
                    and abs(p.b[i] - p.b[j]) <= DUPLICATE_TOL):
                dups.append((p.facet_ids[i], p.facet_ids[j]))
    radius, _ = chebyshev_slack(p)
    empty = radius <= TIGHT_TOL
    redundant = []
    if not empty:
        twins: dict[int, set[int]] = {}
        for a, b in dups:
            ia, ib = p.index_of(a), p.index_of(b)
            twins.setdefault(ia, set()).add(ib)
            twins.setdefault(ib, set()).add(ia)
        for j, fid in enumerate(p.facet_ids):
            if facet_witness_slack(p, j, exclude=twins.get(j, ())) <= TIGHT_TOL:
                redundant.append(fid)
    rec = recession_direction(p)
    return ValidationReport(dups, redundant, empty, rec is None,
                            None if rec is None else rec.tolist())


def random_rotation(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed rotation (determinant +1)."""
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def rotation_2d(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])
