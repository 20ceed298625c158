"""Compiled inner loops for the greedy placement screen."""
from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def cache_lookup(Q, pts, table, inv_cell, mult, threshold):
    """Check each row of ``Q`` against the points cached for its grid cell.

    Returns a hit mask (some cached point has cosine >= ``threshold``) and
    the table row used by each query.
    """
    B, N = Q.shape
    rows, slots = table.shape
    mask = rows - 1
    hit = np.zeros(B, dtype=np.bool_)
    keys = np.empty(B, dtype=np.int64)
    for b in range(B):
        h = np.int64(0)
        for k in range(N):
            h += np.int64(math.floor((Q[b, k] + 1.0) * inv_cell)) * mult[k]
        key = h & mask
        keys[b] = key
        for s in range(slots):
            j = table[key, s]
            if j < 0:
                break
            d = 0.0
            for k in range(N):
                d += Q[b, k] * pts[j, k]
            if d >= threshold:
                hit[b] = True
                break
    return hit, keys


@njit(cache=True)
def cache_store(table, cursor, keys, witnesses):
    rows, slots = table.shape
    for i in range(keys.size):
        key = keys[i]
        w = witnesses[i]
        seen = False
        for s in range(slots):
            if table[key, s] == w:
                seen = True
                break
        if not seen:
            c = cursor[key]
            table[key, c] = w
            cursor[key] = (c + 1) % slots
