"""Synthetic quantum-dot cells, random class polygons and dataset assembly."""
from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bounds import QDGeometry
from .fingerprint import fingerprint
from .geometry import ConvexPolytope, GeometryError, rotation_2d
from .metrics import ClassParams, MetricsError, class_membership, enumerate_vertices
from .sphere import place_uniform_circle

# slope ranges of the strip classes, open intervals
C2_SLOPES = (-0.5, 0.0)
C3_SLOPES = (-2.0, -0.5)
C4_ANGLES = (math.pi / 2, math.pi - math.atan(2.0))  # line angle; slope -inf .. -2

LONG_RATIO_MAX = 1.2
APEX_HEIGHT = (0.35, 0.6)  # apex height above the short edges, in units of w
APEX_SHIFT = 0.15  # max sideways apex offset, in units of w
INSET = 0.05
MAX_REJECTIONS = 10_000


class QDError(ValueError):
    pass


class QDClass(str, enum.Enum):
    C1_HEXAGON = "C1_HEXAGON"
    C2_STRIP_SHALLOW = "C2_STRIP_SHALLOW"
    C3_STRIP_MID = "C3_STRIP_MID"
    C4_STRIP_STEEP = "C4_STRIP_STEEP"
    C5_OPEN = "C5_OPEN"


CLASSES = list(QDClass)
STRIP_CLASSES = (QDClass.C2_STRIP_SHALLOW, QDClass.C3_STRIP_MID, QDClass.C4_STRIP_STEEP)


@dataclass(eq=False)
class QDCell:
    label: QDClass
    geometry: ConvexPolytope | None  # None is the open cell
    params: QDGeometry | None = None
    slope: float | None = None  # strips only; -inf never occurs (open interval)
    aperture_detectable: bool = False
    short_facets: tuple[int, ...] = ()
    long_pairs: tuple[tuple[int, int], ...] = ()

    def measured_geometry(self) -> ConvexPolytope | None:
        """The region as seen by rays: undetectable short edges are dropped."""
        if self.geometry is None or self.aperture_detectable or not self.short_facets:
            return self.geometry
        return self.geometry.without(self.short_facets)


# ------------------------------------------------------------- hexagons

def hexagon_vertices(a: float, w: float, height: float, apex_shift: float) -> np.ndarray:
    """Center-symmetric template, counter-clockwise from the lower end of the
    right short edge. Short edges are vertical, ``w`` apart."""
    return np.array([
        [w / 2, -a / 2], [w / 2, a / 2], [apex_shift, a / 2 + height],
        [-w / 2, a / 2], [-w / 2, -a / 2], [-apex_shift, -a / 2 - height]])


def gen_hexagon(a: float, w: float, orientation: float = 0.0, seed: int = 0) -> QDCell:
    """Hexagonal double-dot cell with short edges of length ``a`` and width ``w``.

    Facet ids follow the template edges: 0 and 3 are the short edges, the
    long pairs (1, 2) and (4, 5) meet at the two apexes. With ``a == 0`` the
    short edges vanish and a quadrilateral with facets 1, 2, 4, 5 remains.
    """
    if w <= 0 or a < 0:
        raise QDError("need w > 0 and a >= 0")
    if a > w:
        raise QDError("aperture a cannot exceed width w")
    rng = np.random.default_rng(seed)
    for _ in range(MAX_REJECTIONS):
        h = w * rng.uniform(*APEX_HEIGHT)
        s = w * rng.uniform(-APEX_SHIFT, APEX_SHIFT)
        l1 = math.hypot(w / 2 - s, h)
        l2 = math.hypot(w / 2 + s, h)
        if max(l1, l2) <= LONG_RATIO_MAX * min(l1, l2):
            break
    else:  # pragma: no cover - the acceptance region is large
        raise QDError("could not draw balanced long edges")
    V = hexagon_vertices(a, w, h, s) @ rotation_2d(orientation).T
    edges = np.roll(V, -1, axis=0) - V
    normals = np.column_stack([edges[:, 1], -edges[:, 0]])
    offsets = np.einsum("ij,ij->i", normals, V)
    ids = [0, 1, 2, 3, 4, 5]
    if a == 0:
        keep = [1, 2, 4, 5]
        normals, offsets, ids = normals[keep], offsets[keep], keep
    poly = ConvexPolytope.from_raw(normals, offsets, ids)
    return QDCell(QDClass.C1_HEXAGON, poly, QDGeometry(a, w),
                  short_facets=(0, 3) if a > 0 else (),
                  long_pairs=((1, 2), (4, 5)))


# --------------------------------------------------------------- strips

def strip_line_angle(cls: QDClass, rng: np.random.Generator) -> float:
    """Direction angle of the strip's boundary lines, drawn for ``cls``."""
    if cls == QDClass.C2_STRIP_SHALLOW:
        return math.atan(_open_uniform(rng, *C2_SLOPES))
    if cls == QDClass.C3_STRIP_MID:
        return math.atan(_open_uniform(rng, *C3_SLOPES))
    if cls == QDClass.C4_STRIP_STEEP:
        return _open_uniform(rng, *C4_ANGLES)
    raise QDError(f"{cls} is not a strip class")


def _open_uniform(rng, lo, hi):
    while True:
        x = rng.uniform(lo, hi)
        if lo < x < hi:
            return x


def gen_strip(cls: QDClass, width: float, seed: int) -> QDCell:
    if width <= 0:
        raise QDError("strip width must be positive")
    cls = QDClass(cls)
    rng = np.random.default_rng(seed)
    beta = strip_line_angle(cls, rng)
    n = np.array([-math.sin(beta), math.cos(beta)])
    poly = ConvexPolytope(np.vstack([n, -n]), [width / 2, width / 2])
    slope = math.tan(beta)
    return QDCell(cls, poly, slope=slope)


def gen_open() -> QDCell:
    return QDCell(QDClass.C5_OPEN, None)


# ------------------------------------------------- random class polygons

def _gap_range(alpha: float) -> tuple[float, float]:
    return min(alpha, math.pi - alpha), max(alpha, math.pi - alpha)


def gen_random_polygon(params: ClassParams, seed: int, angle_rule: str = "sine",
                       max_rejections: int = MAX_REJECTIONS) -> ConvexPolytope:
    """Rejection-sample a polygon certified to lie in the class.

    Outward normal angles advance by gaps that keep each exterior angle
    admissible; offsets are jittered, the result is scaled into the
    diameter/edge window and finally checked by :func:`class_membership`.
    """
    if params.dim != 2:
        raise QDError("random polygons are planar")
    rng = np.random.default_rng(seed)
    alpha = params.exterior_angle_max
    lo, hi = _gap_range(alpha) if angle_rule == "sine" else (0.0, alpha)
    two_pi = 2 * math.pi
    ks = [k for k in range(3, 400)
          if k * lo < two_pi - 1e-9 and k * hi > two_pi + 1e-9]
    if not ks:
        raise QDError("no polygon side count fits the exterior-angle window")
    ratio = params.inscription_min / params.diameter_max
    for _ in range(max_rejections):
        k = int(rng.choice(ks))
        gaps = rng.uniform(lo, hi, size=k - 1)
        last = two_pi - gaps.sum()
        if not lo < last < hi:
            continue
        ang = rng.uniform(0, two_pi) + np.concatenate([[0.0], np.cumsum(gaps)])
        normals = np.column_stack([np.cos(ang), np.sin(ang)])
        offsets = 1.0 + rng.uniform(-0.35, 0.35, size=k)
        try:
            poly = ConvexPolytope(normals, offsets)
            verts = enumerate_vertices(poly)
        except (GeometryError, MetricsError):
            continue
        if len(verts) != k or any(len(v.facets) != 2 for v in verts):
            continue  # some offset made an edge vanish
        V = np.array([v.point for v in verts])
        diam = max(np.linalg.norm(p - q) for p in V for q in V)
        edge = min(np.linalg.norm(verts[i].point - verts[j].point)
                   for i in range(k) for j in range(i + 1, k)
                   if set(verts[i].facets) & set(verts[j].facets))
        if edge / diam < ratio:
            continue
        s = rng.uniform(params.inscription_min / edge, params.diameter_max / diam)
        shift = rng.uniform(-1.0, 1.0, size=2) * params.diameter_max
        poly = poly.transformed(scale=s, translation=shift)
        if class_membership(poly, params, angle_rule=angle_rule).member:
            return poly
    raise QDError(f"no polygon found in the class after {max_rejections} draws")


# ------------------------------------------------------------ datasets

def sample_interior(poly: ConvexPolytope, rng: np.random.Generator,
                    inset: float = INSET) -> np.ndarray:
    """Uniform point at least ``inset`` x (cell size) inside a bounded cell."""
    V = np.array([v.point for v in enumerate_vertices(poly)])
    lo, hi = V.min(axis=0), V.max(axis=0)
    margin = inset * float(np.max(hi - lo))
    for _ in range(MAX_REJECTIONS):
        x = rng.uniform(lo, hi)
        if np.all(poly.A @ x <= poly.b - margin):
            return x
    raise QDError("could not place an observation point")


def encode(t: np.ndarray, T: float) -> np.ndarray:
    """Clamp at ``T`` and normalise; ``inf`` becomes 1."""
    return np.where(np.isfinite(t), np.minimum(t, T) / T, 1.0)


@dataclass(eq=False)
class Dataset:
    features: np.ndarray  # (n, M) in [0, 1]
    labels: np.ndarray  # class indices into ``classes``
    classes: list[str]
    M: int
    T: float
    noise: float
    seed: int
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.labels.size

    def header(self) -> dict:
        return {"M": self.M, "T": self.T, "noise": self.noise, "seed": self.seed,
                "classes": list(self.classes), **self.meta}

    def to_jsonl(self) -> str:
        lines = [json.dumps(self.header())]
        for x, y in zip(self.features, self.labels):
            lines.append(json.dumps({"features": x.tolist(),
                                     "label": self.classes[int(y)]}))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "Dataset":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not rows:
            raise QDError("empty dataset file")
        head = rows[0]
        for key in ("M", "T", "noise", "seed", "classes"):
            if key not in head:
                raise QDError(f"dataset header lacks {key!r}")
        classes = list(head["classes"])
        index = {c: i for i, c in enumerate(classes)}
        X = np.array([r["features"] for r in rows[1:]], dtype=float).reshape(-1, head["M"])
        try:
            y = np.array([index[r["label"]] for r in rows[1:]], dtype=int)
        except KeyError as exc:
            raise QDError(f"unknown label {exc}") from None
        meta = {k: v for k, v in head.items() if k not in ("M", "T", "noise", "seed", "classes")}
        return cls(X, y, classes, int(head["M"]), float(head["T"]), float(head["noise"]),
                   int(head["seed"]), meta)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.features[idx], self.labels[idx], self.classes, self.M,
                       self.T, self.noise, self.seed, dict(self.meta))


def binary_view(data: Dataset) -> Dataset:
    """Hexagon-vs-strip relabelling; open cells are dropped."""
    names = [data.classes[i] for i in data.labels]
    keep = [i for i, c in enumerate(names) if c != QDClass.C5_OPEN.value]
    y = np.array([0 if names[i] == QDClass.C1_HEXAGON.value else 1 for i in keep], dtype=int)
    meta = dict(data.meta, view="hexagon-vs-strip")
    return Dataset(data.features[keep], y, ["HEXAGON", "STRIP"], data.M, data.T,
                   data.noise, data.seed, meta)


def sample_cell(cls: QDClass, rng: np.random.Generator,
                aperture_detectable: bool) -> QDCell:
    w = rng.uniform(0.6, 1.4)
    if cls == QDClass.C1_HEXAGON:
        a = w * rng.uniform(0.0, 0.5)
        cell = gen_hexagon(a, w, rng.uniform(0, 2 * math.pi), int(rng.integers(2**63)))
        cell.aperture_detectable = aperture_detectable
        return cell
    if cls == QDClass.C5_OPEN:
        return gen_open()
    return gen_strip(cls, w, int(rng.integers(2**63)))


def observation_point(cell: QDCell, rng: np.random.Generator) -> np.ndarray:
    if cell.geometry is None:
        return np.zeros(2)
    if cell.label == QDClass.C1_HEXAGON:
        return sample_interior(cell.geometry, rng)
    n, half = cell.geometry.A[0], cell.geometry.b[0]
    along = np.array([-n[1], n[0]])
    return rng.uniform(-1, 1) * (1 - 2 * INSET) * half * n + rng.uniform(-1, 1) * along


def cell_times(cell: QDCell, x_o, M: int, T: float, offset: float):
    """Raw exit distances and hit facets of the ``M``-ray fan on a cell."""
    dirs = place_uniform_circle(M, offset)
    geom = cell.measured_geometry()
    if geom is None:
        return np.full(M, math.inf), [()] * M
    f = fingerprint(geom, x_o, dirs, T)
    return f.distances, f.hit_facets


def _sample(args) -> np.ndarray:
    cls, i, M, T, noise, detectable, seed = args
    rng = np.random.default_rng(np.random.SeedSequence([seed, CLASSES.index(cls), i]))
    cell = sample_cell(cls, rng, detectable)
    x_o = observation_point(cell, rng)
    t, _ = cell_times(cell, x_o, M, T, rng.uniform(0, 2 * math.pi / M))
    eps = rng.uniform(-noise, noise, size=M) if noise > 0 else np.zeros(M)
    t = np.where(np.isfinite(t), t * (1 + eps), t)
    return encode(t, T)


def gen_dataset(n_per_class: int, M: int, T: float = 3.0, noise: float = 0.03,
                aperture_detectable: bool = False, seed: int = 0,
                workers: int = 1) -> Dataset:
    """Labelled fingerprint features for all five cell classes.

    Each sample derives its own seed from ``(seed, class, index)``, so the
    output is identical for any ``workers`` count.
    """
    if n_per_class < 1 or M < 1:
        raise QDError("need n_per_class >= 1 and M >= 1")
    if T <= 0 or noise < 0:
        raise QDError("need T > 0 and noise >= 0")
    jobs = [(c, i, M, T, noise, aperture_detectable, seed)
            for c in CLASSES for i in range(n_per_class)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            X = list(ex.map(_sample, jobs, chunksize=256))
    else:
        X = [_sample(j) for j in jobs]
    y = np.repeat(np.arange(len(CLASSES)), n_per_class)
    return Dataset(np.array(X), y, [c.value for c in CLASSES], M, T, noise, seed,
                   {"aperture_detectable": aperture_detectable,
                    "n_per_class": n_per_class})
