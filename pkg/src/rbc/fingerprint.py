"""Point fingerprints and per-facet hit accounting."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import ConvexPolytope, GeometryError, as_vector, exit_distances, is_interior
from .sphere import DirectionSet


@dataclass(eq=False)
class Fingerprint:
    """Ordered exit distances from one observation point.

    ``distances[i]`` belongs to ``directions.directions[i]``; ``inf`` marks a
    ray that leaves no trace within ``cutoff``.
    """

    observation_point: np.ndarray
    directions: DirectionSet
    distances: np.ndarray
    cutoff: float
    hit_facets: list[tuple[int, ...]]

    def __post_init__(self):
        t = np.asarray(self.distances, dtype=float)
        if t.shape != (len(self.directions),):
            raise GeometryError("one distance per direction is required")
        if np.any(t <= 0) or np.any(np.isfinite(t) & (t > self.cutoff)):
            raise GeometryError("finite distances must lie in (0, cutoff]")
        if len(self.hit_facets) != t.size:
            raise GeometryError("one facet list per direction is required")
        self.distances = t
        self.observation_point = as_vector(self.observation_point, self.directions.dim)

    @property
    def M(self) -> int:
        return self.distances.size

    def boundary_points(self) -> np.ndarray:
        """Hit points ``x_o + t_i v_i`` (rows with ``inf`` distances are ``inf``)."""
        return self.observation_point + self.distances[:, None] * self.directions.directions

    def to_dict(self, directions_ref=None) -> dict:
        """Serializable form; ``directions_ref`` may name a direction file
        instead of inlining the directions."""
        return {
            "x_o": self.observation_point.tolist(),
            "T": self.cutoff,
            "directions_ref": directions_ref if directions_ref is not None
            else self.directions.to_dict(),
            "t": [float(x) if math.isfinite(x) else "inf" for x in self.distances],
            "hit_facets": [list(h) for h in self.hit_facets],
        }

    @classmethod
    def from_dict(cls, data: dict, directions: DirectionSet | None = None) -> "Fingerprint":
        ref = data["directions_ref"]
        if isinstance(ref, dict):
            directions = DirectionSet.from_dict(ref)
        elif directions is None:
            raise GeometryError(f"fingerprint refers to external directions {ref!r}")
        t = [math.inf if x == "inf" else float(x) for x in data["t"]]
        return cls(np.asarray(data["x_o"], dtype=float), directions, np.array(t),
                   float(data["T"]), [tuple(h) for h in data["hit_facets"]])


def fingerprint(p: ConvexPolytope, x_o, dirs: DirectionSet, T: float = math.inf
                ) -> Fingerprint:
    x = as_vector(x_o, p.dim)
    if dirs.dim != p.dim:
        raise GeometryError("direction set and polytope dimensions differ")
    if not is_interior(p, x):
        raise GeometryError("observation point is not strictly inside the polytope")
    t, tight = exit_distances(p, x, dirs.directions, T)
    hits = [tuple(p.facet_ids[j] for j in np.flatnonzero(row)) for row in tight]
    return Fingerprint(x, dirs, t, T, hits)


@dataclass(frozen=True)
class HitReport:
    counts: dict[int, int]
    min_count: int
    facets_below: tuple[int, ...]

    @property
    def max_count(self) -> int:
        return max(self.counts.values(), default=0)


def hit_report(f: Fingerprint, p: ConvexPolytope, threshold: int = 0) -> HitReport:
    """Per-facet hit counts of ``f`` on ``p``; facets hit fewer than
    ``threshold`` times are listed in ``facets_below``."""
    counts = {fid: 0 for fid in p.facet_ids}
    for hits in f.hit_facets:
        for fid in hits:
            if fid not in counts:
                raise GeometryError(f"fingerprint mentions unknown facet {fid}")
            counts[fid] += 1
    below = tuple(fid for fid, c in counts.items() if c < threshold)
    return HitReport(counts, min(counts.values()), below)
