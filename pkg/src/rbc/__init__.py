"""Ray-based classification of convex polytopes.

Fingerprints from evenly spaced or greedily placed ray fans, closed-form
ray budgets, randomized verification of the hit guarantees and a small
quantum-dot cell classification experiment.
"""
__version__ = "0.1.0"

from .geometry import ConvexPolytope, HalfSpace, Ray, exit_distances, ray_exit  # noqa: E402
from .sphere import DirectionSet, place_greedy, place_uniform_circle  # noqa: E402
from .metrics import ClassParams, class_membership, compute_metrics, theta_min  # noqa: E402
from .fingerprint import Fingerprint, fingerprint, hit_report  # noqa: E402
from .bounds import rays_2d, rays_nd, rays_qd  # noqa: E402

__all__ = [
    "ConvexPolytope", "HalfSpace", "Ray", "exit_distances", "ray_exit",
    "DirectionSet", "place_greedy", "place_uniform_circle",
    "ClassParams", "class_membership", "compute_metrics", "theta_min",
    "Fingerprint", "fingerprint", "hit_report",
    "rays_2d", "rays_nd", "rays_qd",
]
