"""Small dense linear programming solver.

Two-phase tableau simplex with Bland's anti-cycling rule. Intended for the
Chebyshev-center and facet-witness problems used by :mod:`rbc.metrics` and
:mod:`rbc.geometry`: a handful of free variables and at most a few hundred
constraints.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OPTIMAL = "optimal"
UNBOUNDED = "unbounded"
INFEASIBLE = "infeasible"

_EPS = 1e-11


@dataclass(frozen=True)
class LPResult:
    status: str
    x: np.ndarray | None
    value: float

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def _pivot(tab: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    col_vals = tab[:, col].copy()
    col_vals[row] = 0.0
    tab -= np.outer(col_vals, tab[row])


def _run_simplex(tab: np.ndarray, basis: list[int], n_cols: int,
                 max_iter: int) -> str:
    """Maximize the objective held in the last row of ``tab``.

    The last row stores reduced costs as ``-c`` so that a negative entry
    marks an improving column. Only the first ``n_cols`` columns may enter.
    """
    m = len(basis)
    for _ in range(max_iter):
        obj = tab[-1, :n_cols]
        candidates = np.flatnonzero(obj < -_EPS)
        if candidates.size == 0:
            return OPTIMAL
        col = int(candidates[0])  # Bland: lowest index
        column = tab[:m, col]
        pos = column > _EPS
        if not pos.any():
            return UNBOUNDED
        ratios = np.full(m, np.inf)
        ratios[pos] = tab[:m, -1][pos] / column[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + _EPS * max(1.0, abs(best)))
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(tab, row, col)
        basis[row] = col
    raise RuntimeError("simplex iteration limit reached")


def linprog_max(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None,
                max_iter: int = 10_000) -> LPResult:
    """Maximize ``c @ x`` over free ``x`` subject to
    ``A_ub @ x <= b_ub`` and ``A_eq @ x == b_eq``.

    Returns an :class:`LPResult`; ``x`` is ``None`` unless optimal.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, float).ravel()
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    # columns: x+ (n), x- (n), slacks (m_ub), artificials (m), rhs
    n_struct = 2 * n + m_ub
    tab = np.zeros((m + 1, n_struct + m + 1))
    tab[:m_ub, :n] = A_ub
    tab[:m_ub, n:2 * n] = -A_ub
    tab[:m_ub, 2 * n:n_struct] = np.eye(m_ub)
    tab[:m_ub, -1] = b_ub
    tab[m_ub:m, :n] = A_eq
    tab[m_ub:m, n:2 * n] = -A_eq
    tab[m_ub:m, -1] = b_eq
    neg = tab[:m, -1] < 0
    tab[:m][neg] *= -1.0
    tab[:m, n_struct:n_struct + m] = np.eye(m)
    basis = list(range(n_struct, n_struct + m))

    # phase 1: maximize -sum(artificials)
    tab[-1, n_struct:n_struct + m] = 1.0
    tab[-1] -= tab[:m].sum(axis=0)
    _run_simplex(tab, basis, n_struct + m, max_iter)
    if -tab[-1, -1] > 1e-8 * max(1.0, np.abs(tab[:m, -1]).max(initial=0.0)):
        return LPResult(INFEASIBLE, None, float("nan"))

    # drive remaining artificials out of the basis
    keep = np.ones(m, dtype=bool)
    for r in range(m):
        if basis[r] >= n_struct:
            nz = np.flatnonzero(np.abs(tab[r, :n_struct]) > 1e-9)
            if nz.size:
                _pivot(tab, r, int(nz[0]))
                basis[r] = int(nz[0])
            else:
                keep[r] = False  # redundant equality row
    rows = np.flatnonzero(keep)
    tab = np.vstack([tab[rows][:, list(range(n_struct)) + [-1]],
                     np.zeros((1, n_struct + 1))])
    basis = [basis[r] for r in rows]

    # phase 2
    tab[-1, :n] = -c
    tab[-1, n:2 * n] = c
    for r, b in enumerate(basis):
        if tab[-1, b] != 0.0:
            tab[-1] -= tab[-1, b] * tab[r]
    status = _run_simplex(tab, basis, n_struct, max_iter)
    if status == UNBOUNDED:
        return LPResult(UNBOUNDED, None, float("inf"))
    z = np.zeros(n_struct)
    for r, b in enumerate(basis):
        z[b] = tab[r, -1]
    x = z[:n] - z[n:2 * n]
    return LPResult(OPTIMAL, x, float(c @ x))
