"""Constructors for the standard test shapes."""
from __future__ import annotations

import math

import numpy as np

from .geometry import ConvexPolytope, GeometryError


def regular_polygon(k: int, circumradius: float = 1.0, rotation: float = 0.0,
                    center=(0.0, 0.0)) -> ConvexPolytope:
    if k < 3:
        raise GeometryError("a polygon needs at least three sides")
    ang = rotation + 2.0 * math.pi * np.arange(k) / k
    V = circumradius * np.column_stack([np.cos(ang), np.sin(ang)])
    return ConvexPolytope.from_vertices_2d(V + np.asarray(center, dtype=float))


def box(lengths, center=None) -> ConvexPolytope:
    """Axis-aligned box with the given side lengths, centered at ``center``."""
    L = np.asarray(lengths, dtype=float)
    n = L.size
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    eye = np.eye(n)
    A = np.vstack([eye, -eye])
    b = np.concatenate([c + L / 2, -(c - L / 2)])
    return ConvexPolytope(A, b)


def cube(dim: int, side: float = 1.0) -> ConvexPolytope:
    return box([side] * dim)


def unit_square() -> ConvexPolytope:
    """[0, 1]^2 with facets x<=1, y<=1, -x<=0, -y<=0."""
    return box([1.0, 1.0], center=[0.5, 0.5])


def simplex_vertices(dim: int, edge: float = 1.0) -> np.ndarray:
    """Vertices of a regular simplex centered at the origin."""
    E = np.eye(dim + 1)
    E -= E.mean(axis=0)
    # orthonormal basis of the hyperplane sum(x) = 0
    _, _, vt = np.linalg.svd(np.ones((1, dim + 1)))
    V = E @ vt[1:].T
    return V * (edge / math.sqrt(2.0))


def regular_simplex(dim: int, edge: float = 1.0) -> ConvexPolytope:
    V = simplex_vertices(dim, edge)
    normals = -V / np.linalg.norm(V, axis=1)[:, None]  # facet opposite vertex i
    offsets = np.array([normals[i] @ V[(i + 1) % (dim + 1)] for i in range(dim + 1)])
    return ConvexPolytope(normals, offsets)


def prism(base: ConvexPolytope, heights) -> ConvexPolytope:
    """Cartesian product of ``base`` with centered intervals of the given lengths."""
    h = np.atleast_1d(np.asarray(heights, dtype=float))
    n0, extra = base.dim, h.size
    A_base = np.hstack([base.A, np.zeros((base.n_facets, extra))])
    eye = np.hstack([np.zeros((extra, n0)), np.eye(extra)])
    A = np.vstack([A_base, eye, -eye])
    b = np.concatenate([base.b, h / 2, h / 2])
    return ConvexPolytope(A, b)


def strip(normal_angle: float, width: float, center=(0.0, 0.0)) -> ConvexPolytope:
    """Region between two parallel lines ``width`` apart, normal at ``normal_angle``."""
    if width <= 0:
        raise GeometryError("strip width must be positive")
    n = np.array([math.cos(normal_angle), math.sin(normal_angle)])
    c = n @ np.asarray(center, dtype=float)
    return ConvexPolytope(np.vstack([n, -n]), [c + width / 2, -c + width / 2])
