"""Planar polygon reconstruction from a fingerprint."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .fingerprint import Fingerprint
from .geometry import ConvexPolytope, GeometryError, exit_distances

COLLINEAR_REL_TOL = 1e-7
CONSISTENCY_REL_TOL = 1e-6


class ReconstructionError(ValueError):
    pass


class Ambiguity(str, enum.Enum):
    UNIQUE = "UNIQUE"
    PRIMAL_DUAL_AMBIGUOUS = "PRIMAL_DUAL_AMBIGUOUS"


@dataclass(eq=False)
class ReconstructedPolygon:
    vertices: np.ndarray  # counter-clockwise
    edge_lines: list[tuple[np.ndarray, float]]  # (outward unit normal, offset)
    ambiguity: Ambiguity
    runs: list[list[int]]  # indices into the angularly sorted hit points
    alternative: "ReconstructedPolygon | None" = None

    def polytope(self) -> ConvexPolytope:
        return ConvexPolytope([n for n, _ in self.edge_lines],
                              [o for _, o in self.edge_lines])

    def to_dict(self) -> dict:
        out = {"vertices": self.vertices.tolist(),
               "edge_lines": [{"normal": n.tolist(), "offset": o}
                              for n, o in self.edge_lines],
               "ambiguity": self.ambiguity.value}
        if self.alternative is not None:
            out["alternative"] = self.alternative.to_dict()
        return out


def _off_line(a, b, q) -> float:
    d = b - a
    cross = d[0] * (q[1] - a[1]) - d[1] * (q[0] - a[0])
    return abs(cross) / np.linalg.norm(d)


def _fit_line(pts: np.ndarray, x_o: np.ndarray) -> tuple[np.ndarray, float]:
    """Total-least-squares line, normal oriented away from ``x_o``."""
    c = pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts - c)
    n = vt[-1]
    if n @ (c - x_o) < 0:
        n = -n
    return n, float(n @ c)


def _long_runs(Q: np.ndarray, tau: float) -> list[list[int]]:
    """Maximal cyclic runs of >= 3 consecutive collinear points."""
    M = len(Q)
    tri = np.array([_off_line(Q[i - 1], Q[(i + 1) % M], Q[i]) < tau for i in range(M)])
    if tri.all():
        raise ReconstructionError("all boundary points are collinear")
    if not tri.any():
        return []
    start = int(np.flatnonzero(~tri)[0])  # begin scanning at a break
    runs, cur = [], None
    for s in range(1, M + 1):
        i = (start + s) % M
        if tri[i]:
            if cur is None:
                cur = [(i - 1) % M, i]
            cur.append((i + 1) % M)
        elif cur is not None:
            runs.append(cur)
            cur = None
    if cur is not None:
        runs.append(cur)
    # a run grown triple by triple repeats indices; keep order, drop repeats
    return [list(dict.fromkeys(r)) for r in runs]


def _pair_gap(gap: list[int], left_end: int, right_start: int) -> list[list[list[int]]]:
    """Ways to split the points strictly between two long runs into 2-point runs.

    An odd gap needs one corner hit, shared with a neighbouring long run.
    """
    def pairs(seq):
        return [seq[k:k + 2] for k in range(0, len(seq), 2)]
    if len(gap) % 2 == 0:
        return [pairs(gap)] if gap else [[]]
    return [pairs([left_end] + gap), pairs(gap + [right_start])]


def _assemble(runs: list[list[int]], Q: np.ndarray, x_o: np.ndarray
              ) -> tuple[np.ndarray, list[tuple[np.ndarray, float]]]:
    lines = [_fit_line(Q[r], x_o) for r in runs]
    k = len(lines)
    if k < 3:
        raise ReconstructionError("fewer than three edges recovered")
    V = []
    for i in range(k):
        (n1, o1), (n2, o2) = lines[i], lines[(i + 1) % k]
        A = np.array([n1, n2])
        if abs(np.linalg.det(A)) < 1e-14:
            raise ReconstructionError("adjacent recovered edges are parallel")
        V.append(np.linalg.solve(A, [o1, o2]))
    return np.array(V), lines


def _consistent(lines, x_o, D, t, scale) -> bool:
    """Does the candidate polygon reproduce every measured distance?"""
    try:
        P = ConvexPolytope([n for n, _ in lines], [o for _, o in lines])
        t_hat, _ = exit_distances(P, x_o, D)
    except GeometryError:
        return False
    return bool(np.all(np.abs(t_hat - t) <= CONSISTENCY_REL_TOL * scale))


def reconstruct_2d(f: Fingerprint) -> ReconstructedPolygon:
    """Recover a polygon's supporting lines from a planar fingerprint.

    Hit points are sorted by ray angle and partitioned into runs of
    consecutive collinear points, one run per edge. Runs of three or more
    points are unambiguous. Points between such runs must pair up. When no
    edge has three hits the pairing can start at either parity, which gives
    the two mutually consistent readings (a polygon and its dual); both are
    returned and the result is flagged ``PRIMAL_DUAL_AMBIGUOUS``.
    """
    if f.directions.dim != 2:
        raise ReconstructionError("reconstruction is planar only")
    if not np.all(np.isfinite(f.distances)):
        raise ReconstructionError("infinite distance: the cell is open")
    D = f.directions.directions
    order = np.argsort(np.mod(np.arctan2(D[:, 1], D[:, 0]), 2 * math.pi))
    x_o = f.observation_point
    D, t = D[order], f.distances[order]
    Q = x_o + t[:, None] * D
    M = len(Q)
    scale = float(t.max())
    tau = COLLINEAR_REL_TOL * scale
    if M < 4:
        raise ReconstructionError("too few rays to pin down any polygon")

    long_runs = _long_runs(Q, tau)
    if not long_runs:
        if M % 2:
            raise ReconstructionError("an edge is hit only once: insufficient rays")
        found = []
        for shift in (0, 1):
            seq = [(shift + k) % M for k in range(M)]
            runs = [seq[k:k + 2] for k in range(0, M, 2)]
            try:
                V, lines = _assemble(runs, Q, x_o)
            except ReconstructionError:
                continue
            if _consistent(lines, x_o, D, t, scale):
                found.append(ReconstructedPolygon(V, lines,
                                                  Ambiguity.PRIMAL_DUAL_AMBIGUOUS,
                                                  [[int(order[i]) for i in r] for r in runs]))
        if not found:
            raise ReconstructionError("no consistent pairing of boundary points")
        if len(found) == 2:
            found[0].alternative = found[1]
        return found[0]

    # gaps between consecutive long runs, walking the cycle
    options: list[list[list[list[int]]]] = []
    for a, b in zip(long_runs, long_runs[1:] + long_runs[:1]):
        end, nxt = a[-1], b[0]
        gap = []
        i = (end + 1) % M
        while i != nxt and not (i == end):
            gap.append(i)
            i = (i + 1) % M
        if nxt == end:  # runs share a corner hit
            options.append([[]])
        else:
            options.append(_pair_gap(gap, end, nxt))

    def candidates(k=0, acc=()):
        if k == len(long_runs):
            yield list(acc)
            return
        for choice in options[k]:
            yield from candidates(k + 1, acc + (long_runs[k],) + tuple(choice))

    for runs in candidates():
        if any(len(r) < 2 for r in runs):
            continue
        try:
            V, lines = _assemble(runs, Q, x_o)
        except ReconstructionError:
            continue
        if _consistent(lines, x_o, D, t, scale):
            return ReconstructedPolygon(V, lines, Ambiguity.UNIQUE,
                                        [[int(order[i]) for i in r] for r in runs])
    raise ReconstructionError("an edge is hit only once: insufficient rays")
