"""Spherical geometry on S^(N-1) and direction placement.

Covers great-circle distances, cap ("ball") areas and their elementary
bounds, evenly spaced directions on the circle, and the inductive greedy
placement that yields a phi-dense, phi-separated direction set in any
dimension.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.spatial import cKDTree

from . import _kernels
from .geometry import GeometryError, as_vector


class SphereError(ValueError):
    pass


class PlacementError(RuntimeError):
    """The candidate source ran dry before density could be certified."""


@dataclass(frozen=True)
class DensityReport:
    max_observed_gap: float
    n_uncovered: int
    probes: int
    seed: int | None
    passed: bool

    @property
    def pass_(self) -> bool:  # mirrors the report field name in file formats
        return self.passed


@dataclass(eq=False)
class DirectionSet:
    """Ordered unit directions with an optional certified density radius."""

    directions: np.ndarray
    density_radius: float | None = None
    seed: int | None = None
    certificate: DensityReport | None = field(default=None, repr=False)

    def __post_init__(self):
        D = np.atleast_2d(np.asarray(self.directions, dtype=float))
        if D.shape[1] < 2:
            raise SphereError("directions need dimension >= 2")
        if np.any(np.abs(np.linalg.norm(D, axis=1) - 1.0) > 1e-12):
            raise SphereError("all directions must be unit vectors")
        D.setflags(write=False)
        self.directions = D

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    def __len__(self) -> int:
        return self.directions.shape[0]

    def to_dict(self) -> dict:
        return {"dim": self.dim, "phi": self.density_radius, "seed": self.seed,
                "directions": self.directions.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "DirectionSet":
        D = np.asarray(data["directions"], dtype=float)
        if D.ndim != 2 or D.shape[1] != int(data["dim"]):
            raise SphereError("direction rows do not match 'dim'")
        D = D / np.linalg.norm(D, axis=1)[:, None]
        return cls(D, data.get("phi"), data.get("seed"))


@dataclass(frozen=True)
class SphericalBall:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if not 0.0 < self.radius <= math.pi:
            raise SphereError("ball radius must lie in (0, pi]")

    def contains(self, w) -> bool:
        return great_circle_distance(self.center, w) <= self.radius

    def area(self) -> float:
        return ball_area(np.asarray(self.center).size, self.radius)


def great_circle_distance(v, w) -> float:
    v = as_vector(v)
    w = as_vector(w, v.size)
    return float(np.arccos(np.clip(v @ w, -1.0, 1.0)))


def _check_dim(N: int) -> int:
    if int(N) != N or N < 2:
        raise SphereError(f"dimension must be an integer >= 2, got {N}")
    return int(N)


def sphere_area(N: int) -> float:
    """(N-1)-area of the unit sphere in R^N."""
    N = _check_dim(N)
    return N * math.pi ** (N / 2) / math.gamma(N / 2 + 1)


def _cap_coefficient(N: int) -> float:
    return (N - 1) * math.pi ** ((N - 1) / 2) / math.gamma((N - 1) / 2 + 1)


def ball_area(N: int, r: float) -> float:
    """(N-1)-area of a geodesic ball of radius ``r`` on S^(N-1)."""
    N = _check_dim(N)
    if not 0.0 < r <= math.pi:
        raise SphereError("radius must lie in (0, pi]")
    if N == 2:
        integral = r
    else:
        integral, _ = integrate.quad(lambda rho: math.sin(rho) ** (N - 2), 0.0, r,
                                     epsabs=1e-13, epsrel=1e-12, limit=200)
    return _cap_coefficient(N) * integral


def ball_area_bounds(N: int, r: float) -> tuple[float, float]:
    N = _check_dim(N)
    if not 0.0 < r <= math.pi / 2:
        raise SphereError("bounds hold for radius in (0, pi/2]")
    coef = math.pi ** ((N - 1) / 2) / math.gamma((N + 1) / 2)
    return coef * math.sin(r) ** (N - 1), coef * r ** (N - 1)


def angles_to_directions(angles) -> np.ndarray:
    a = np.asarray(angles, dtype=float)
    return np.column_stack([np.cos(a), np.sin(a)])


def place_uniform_circle(M: int, offset: float = 0.0) -> DirectionSet:
    """``M`` directions at angles ``offset + 2*pi*i/M`` for ``i = 1..M``."""
    if int(M) != M or M < 1:
        raise SphereError("need at least one direction")
    angles = offset + 2.0 * math.pi * np.arange(1, M + 1) / M
    return DirectionSet(angles_to_directions(angles), density_radius=math.pi / M)


def uniform_sphere(rng: np.random.Generator, n: int, N: int) -> np.ndarray:
    g = rng.standard_normal((n, N))
    g /= np.sqrt(np.einsum("ij,ij->i", g, g))[:, None]
    return g


def _nearest_cos(tree: cKDTree | None, tree_pts: np.ndarray, tail: np.ndarray,
                 Q: np.ndarray) -> np.ndarray:
    best = np.full(Q.shape[0], -np.inf)
    if tree is not None:
        _, idx = tree.query(Q, k=1)
        best = np.einsum("ij,ij->i", Q, tree_pts[idx])
    if tail.shape[0]:
        for s in range(0, Q.shape[0], 4096):
            blk = Q[s:s + 4096] @ tail.T
            best[s:s + 4096] = np.maximum(best[s:s + 4096], blk.max(axis=1))
    return best


def _nearest_angle(tree, tree_pts, tail, Q) -> np.ndarray:
    """Great-circle distance from each row of ``Q`` to its nearest point."""
    return np.arccos(np.clip(_nearest_cos(tree, tree_pts, tail, Q), -1.0, 1.0))


# A candidate is accepted only when its cosine to every accepted direction
# stays below cos(phi) by this margin, so separation survives any rounding.
SEPARATION_MARGIN = 1e-12

_HASH_MULT = np.array([(1_000_003 ** (k + 1)) % (1 << 61) for k in range(64)],
                      dtype=np.int64)


class _PointIndex:
    """Growing point set: KD-tree over a prefix plus a short brute-force tail.

    A small direct-mapped table remembers, per coarse grid cell, a few
    points that recently covered a query there. A table hit is still an
    explicit dot product against a real member, so it only saves work.
    """

    SLOTS = 16
    CELL = 0.8  # grid cell edge in units of the covering chord

    def __init__(self, N: int, phi: float):
        self._buf = np.empty((1024, N))
        self.size = 0
        self._n_tree = 0
        self._tree: cKDTree | None = None
        self.accept_cos = math.cos(phi) - SEPARATION_MARGIN
        # chord length matching accept_cos
        self.chord = math.sqrt(max(0.0, 2.0 - 2.0 * self.accept_cos))
        self._inv_cell = 1.0 / max(self.CELL * self.chord, 1e-6)
        self._mult = _HASH_MULT[:N].copy()
        self._reset_table(1 << 12)

    def _reset_table(self, rows: int) -> None:
        self._table = np.full((rows, self.SLOTS), -1, dtype=np.int64)
        self._cursor = np.zeros(rows, dtype=np.int64)

    def __len__(self):
        return self.size

    @property
    def points(self) -> np.ndarray:
        return self._buf[:self.size]

    def add(self, v: np.ndarray) -> None:
        if self.size == self._buf.shape[0]:
            self._buf = np.vstack([self._buf, np.empty_like(self._buf)])
        self._buf[self.size] = v
        self.size += 1
        if self.size - self._n_tree > min(1024, max(32, self._n_tree // 4)):
            self._tree = cKDTree(self._buf[:self.size].copy(), leafsize=8)
            self._n_tree = self.size
            rows = self._table.shape[0]
            if self.size * 16 > rows and rows < (1 << 20):
                self._reset_table(min(1 << 20, rows * 4))

    def max_cos(self, Q: np.ndarray) -> np.ndarray:
        if self.size == 0:
            return np.full(Q.shape[0], -np.inf)
        return _nearest_cos(self._tree, self._buf[:self._n_tree],
                            self._buf[self._n_tree:self.size], Q)

    def nearest_angle(self, Q: np.ndarray) -> np.ndarray:
        return np.arccos(np.clip(self.max_cos(Q), -1.0, 1.0))

    def is_far(self, q: np.ndarray) -> bool:
        return bool(self.max_cos(q[None, :])[0] < self.accept_cos)

    def screen(self, Q: np.ndarray) -> np.ndarray:
        """Mask of rows of ``Q`` that no current point covers.

        Rows are settled, cheapest first, by the cell table, an approximate
        tree search (any point it returns inside the chord is a genuine
        witness), a bounded exact search and finally the brute-force tail.
        """
        B = Q.shape[0]
        far = np.ones(B, dtype=bool)
        if self.size == 0:
            return far
        if self._tree is None:
            idx = np.arange(B)
        else:
            hit, keys = _kernels.cache_lookup(Q, self._buf, self._table, self._inv_cell,
                                              self._mult, self.accept_cos)
            far[hit] = False
            idx = np.flatnonzero(~hit)
            r = self.chord * (1.0 + 1e-9)
            found_rows, found_pts = [], []
            for eps in (3.0, 0.0):
                if not idx.size:
                    break
                d, j = self._tree.query(Q[idx], eps=eps, distance_upper_bound=r)
                near = d <= r
                sub, js = idx[near], j[near]
                cos = np.einsum("ij,ij->i", Q[sub], self._buf[js])
                ok = cos >= self.accept_cos
                far[sub[ok]] = False
                found_rows.append(sub[ok])
                found_pts.append(js[ok])
                idx = idx[far[idx]]
            if found_rows:
                rows = np.concatenate(found_rows)
                _kernels.cache_store(self._table, self._cursor, keys[rows],
                                     np.concatenate(found_pts).astype(np.int64))
            idx = np.flatnonzero(far)
        tail = self._buf[self._n_tree:self.size]
        if idx.size and tail.shape[0]:
            far[idx] = (Q[idx] @ tail.T).max(axis=1) < self.accept_cos
        return far


def _exact_gaps(points: np.ndarray, tree: cKDTree, phi: float, Q: np.ndarray) -> np.ndarray:
    """Great-circle distance from each row of ``Q`` to the nearest point."""
    bound = 2.0 * math.sin(min(phi, math.pi) / 2.0) * (1.0 + 1e-9)
    # exact nearest within the bound; rows beyond it get a full search
    d, j = tree.query(Q, distance_upper_bound=bound)
    g = np.full(Q.shape[0], np.inf)
    ok = np.isfinite(d)
    g[ok] = np.arccos(np.clip(np.einsum("ij,ij->i", Q[ok], points[j[ok]]), -1.0, 1.0))
    if not ok.all():
        g[~ok] = _nearest_angle(tree, points, points[:0], Q[~ok])
    return g


def _density_probe(points: np.ndarray, phi: float, probes: int, seed: int,
                   index: "_PointIndex | None" = None) -> tuple[DensityReport, np.ndarray]:
    """Probe ``probes`` uniform points; return the report and the uncovered ones.

    With ``index`` given, a cheap screen first looks for uncovered probes and
    a failing probe is reported from those alone. A passing verdict always
    comes from the exact nearest distance of every probe.
    """
    N = points.shape[1]
    rng = np.random.default_rng(seed)
    chunk = 1 << 15
    Q = np.vstack([uniform_sphere(rng, min(chunk, probes - s), N)
                   for s in range(0, probes, chunk)])
    tree = cKDTree(points, leafsize=8)
    if index is not None:
        maybe = np.flatnonzero(index.screen(Q))
        if maybe.size:
            g = _exact_gaps(points, tree, phi, Q[maybe])
            bad = g > phi
            if bad.any():
                return (DensityReport(float(g.max()), int(bad.sum()), probes, seed, False),
                        Q[maybe[bad]])
    gaps = _exact_gaps(points, tree, phi, Q)
    uncovered = gaps > phi
    report = DensityReport(float(gaps.max()), int(uncovered.sum()), probes, seed,
                           not bool(uncovered.any()))
    return report, Q[uncovered]


def verify_density(P: DirectionSet, phi: float, probes: int = 100_000,
                   seed: int = 0) -> DensityReport:
    """Monte Carlo check that every sphere point lies within ``phi`` of ``P``."""
    if probes < 1:
        raise SphereError("need at least one probe")
    report, _ = _density_probe(np.asarray(P.directions), phi, probes, seed)
    return report


def rejection_limit(n_points: int, cap: int | None = None) -> int:
    """Consecutive rejections that trigger a density check."""
    limit = 50 * n_points + 1000
    return limit if cap is None else min(limit, cap)


CandidateOracle = Callable[[np.random.Generator, int, int], np.ndarray]


def place_greedy(N: int, phi: float, seed: int,
                 candidate_oracle: CandidateOracle | None = None,
                 density_probes: int = 100_000,
                 max_candidates: int = 2_000_000_000,
                 rejection_cap: int | None = -1) -> DirectionSet:
    """Inductive greedy placement of a phi-dense direction set.

    Each candidate is accepted iff it lies farther than ``phi`` from every
    previously accepted direction (with a cosine margin of
    ``SEPARATION_MARGIN``), so pairwise separation and hence the packing
    count bound hold by construction. The loop stops once
    ``rejection_limit(|P|, rejection_cap)`` consecutive candidates have been
    rejected *and* a probe of ``density_probes`` fresh uniform points finds
    none uncovered. Uncovered probes from a failed check are fed back as the
    next candidates.

    ``rejection_cap`` defaults (``-1``) to ``density_probes``: a streak longer
    than the probe count adds nothing the probe itself would not catch.
    Pass ``None`` for the uncapped ``50 |P| + 1000`` rule.

    ``candidate_oracle(rng, n, N)`` returns ``n`` unit vectors; the default
    draws uniformly on the sphere.
    """
    N = _check_dim(N)
    if not 0.0 < phi <= math.pi:
        raise SphereError("phi must lie in (0, pi]")
    oracle = candidate_oracle or uniform_sphere
    cap = density_probes if rejection_cap == -1 else rejection_cap
    ss = np.random.SeedSequence(seed)
    cand_seed, probe_seed = ss.spawn(2)
    rng = np.random.default_rng(cand_seed)
    probe_rng = np.random.default_rng(probe_seed)

    index = _PointIndex(N, phi)
    index.add(oracle(rng, 1, N)[0])
    streak = 0  # consecutive rejections
    drawn = 1
    queued = np.empty((0, N))
    certificate = None
    while True:
        if queued.shape[0]:
            Q, queued = queued, np.empty((0, N))
        else:
            n = int(min(1 << 16, max(256, streak // 2)))
            Q = oracle(rng, n, N)
            drawn += n
            if drawn > max_candidates:
                raise PlacementError("candidate oracle exhausted before density "
                                     "could be certified")
        # screen against the set as it stood at batch start; survivors are
        # re-checked one by one so acceptance stays strictly sequential
        far = index.screen(Q)
        pos = 0
        triggered = False
        for k in np.flatnonzero(far):
            if streak + (k - pos) >= rejection_limit(len(index), cap):
                triggered = True
                break
            streak += k - pos
            pos = k + 1
            if index.is_far(Q[k]):
                index.add(Q[k])
                streak = 0
            else:
                streak += 1
        if not triggered:
            streak += Q.shape[0] - pos
            if streak < rejection_limit(len(index), cap):
                continue
        report, uncovered = _density_probe(index.points, phi, density_probes,
                                           int(probe_rng.integers(2**63)), index)
        if report.passed:
            certificate = report
            break
        streak = 0
        queued = uncovered
    return DirectionSet(index.points.copy(), density_radius=phi, seed=seed,
                        certificate=certificate)
