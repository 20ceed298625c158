"""Closed-form ray-count bounds."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .metrics import ClassParams, theta_min

CEIL_NUDGE = 1e-9


class BoundsError(ValueError):
    pass


class Guarantee(str, enum.Enum):
    EACH_EDGE_2_ONE_EDGE_3 = "EACH_EDGE_2_ONE_EDGE_3"
    EACH_FACE_N = "EACH_FACE_N"
    QD_DISTINGUISH = "QD_DISTINGUISH"


@dataclass(frozen=True)
class RayBudget:
    M: int
    guarantee: Guarantee
    provenance: str
    theta_min: float | None = None
    phi: float | None = None  # greedy density radius to pair with M
    raw_bound: float | None = None

    def __post_init__(self):
        if self.M < 1:
            raise BoundsError("ray budget must be positive")


@dataclass(frozen=True)
class QDGeometry:
    aperture: float
    width: float

    def __post_init__(self):
        if self.width <= 0 or self.aperture < 0:
            raise BoundsError("need width > 0 and aperture >= 0")

    @property
    def ratio(self) -> float:
        return self.aperture / self.width


def safe_ceil(x: float) -> int:
    """Ceiling that ignores representation error just above an integer."""
    return math.ceil(x - CEIL_NUDGE)


def rays_2d(params: ClassParams) -> RayBudget:
    """Smallest M strictly above ceil(4*pi/theta_min) for evenly spaced rays."""
    if params.dim != 2:
        raise BoundsError("the planar bound needs dim == 2")
    th = theta_min(params)
    need = safe_ceil(4.0 * math.pi / th)
    return RayBudget(need + 1, Guarantee.EACH_EDGE_2_ONE_EDGE_3, "planar-polygon",
                     theta_min=th, raw_bound=4.0 * math.pi / th)


def greedy_count_bound(N: int, phi: float) -> float:
    """Upper bound on the size of any phi-separated greedy set on S^(N-1)."""
    if int(N) != N or N < 2:
        raise BoundsError("dimension must be an integer >= 2")
    if not 0.0 < phi <= math.pi:
        raise BoundsError("phi must lie in (0, pi]")
    return math.sqrt(2.0 * math.pi * N) * (1.0 / math.sin(phi / 2.0)) ** (N - 1)


def rays_nd(params: ClassParams) -> RayBudget:
    th = theta_min(params)
    phi = th / 6.0
    raw = greedy_count_bound(params.dim, phi)
    return RayBudget(math.floor(raw), Guarantee.EACH_FACE_N, "greedy-dense-set",
                     theta_min=th, phi=phi, raw_bound=raw)


def sinc(x: float) -> float:
    return 1.0 if x == 0 else math.sin(x) / x


def covering_count(N: int, theta: float) -> float:
    """Lower bound on how many (theta/6)-balls meet a (theta/3)-ball's cover."""
    if not 0.0 < theta <= math.pi / 2:
        raise BoundsError("theta_min must lie in (0, pi/2]")
    if int(N) != N or N < 2:
        raise BoundsError("dimension must be an integer >= 2")
    return (2.0 * sinc(theta / 3.0)) ** (N - 1)


def qd_theta_min(ratio: float) -> float:
    """Smallest span of a joined long-edge pair for aperture/width ``ratio``."""
    r2 = ratio * ratio
    return math.acos((r2 - 1.0) / (r2 + 1.0))


def rays_qd(g: QDGeometry, aperture_detectable: bool = False) -> RayBudget:
    if aperture_detectable:
        return RayBudget(5, Guarantee.QD_DISTINGUISH, "qd-detectable-aperture")
    th = qd_theta_min(g.ratio)
    raw = 6.0 * math.pi / th
    return RayBudget(safe_ceil(raw), Guarantee.QD_DISTINGUISH,
                     "qd-undetectable-aperture", theta_min=th, raw_bound=raw)
