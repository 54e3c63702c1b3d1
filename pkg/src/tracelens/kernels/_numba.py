"""Numba-compiled implementations of the hot per-step kernels.

Mirrors kernels._numpy exactly; see that module for the contracts. fastmath
stays off so results are reproducible float64 arithmetic.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ._numpy import CUM_SLACK


@njit(cache=True)
def _nucleus_entropy(probs, offsets, p, out_h, out_size, out_mass):
    n = len(offsets) - 1
    for s in range(n):
        lo = offsets[s]
        hi = offsets[s + 1]
        total = 0.0
        for i in range(lo, hi):
            total += probs[i]
        eff = p if p < total else total
        cum = 0.0
        cut = hi
        for i in range(lo, hi):
            cum += probs[i]
            if cum >= eff - CUM_SLACK:
                cut = i + 1
                break
        mass = cum
        h = 0.0
        for i in range(lo, cut):
            q = probs[i] / mass
            if q > 0.0:
                h -= q * np.log(q)
        out_h[s] = h + 0.0
        out_size[s] = cut - lo
        out_mass[s] = mass


def nucleus_entropy_batch(probs, offsets, p):
    n = len(offsets) - 1
    out_h = np.empty(n, dtype=np.float64)
    out_size = np.empty(n, dtype=np.int64)
    out_mass = np.empty(n, dtype=np.float64)
    _nucleus_entropy(
        np.ascontiguousarray(probs, dtype=np.float64),
        np.ascontiguousarray(offsets, dtype=np.int64),
        float(p),
        out_h,
        out_size,
        out_mass,
    )
    return out_h, out_size, out_mass


@njit(cache=True)
def _blocked_row_entropies(matrix, keep, out_h, out_mass):
    n_rows, n_cols = matrix.shape
    for r in range(n_rows):
        mass = 0.0
        for c in range(n_cols):
            if keep[c]:
                mass += matrix[r, c]
        out_mass[r] = mass
        if mass <= 0.0:
            out_h[r] = 0.0
            continue
        h = 0.0
        for c in range(n_cols):
            if keep[c] and matrix[r, c] > 0.0:
                q = matrix[r, c] / mass
                h -= q * np.log(q)
        out_h[r] = h + 0.0


def blocked_row_entropies(matrix, keep):
    matrix = np.ascontiguousarray(matrix, dtype=np.float64)
    keep = np.ascontiguousarray(keep, dtype=np.bool_)
    out_h = np.empty(matrix.shape[0], dtype=np.float64)
    out_mass = np.empty(matrix.shape[0], dtype=np.float64)
    _blocked_row_entropies(matrix, keep, out_h, out_mass)
    return out_h, out_mass


@njit(cache=True)
def _vocab_projection(matrix, keep, source_ids, target_ids, out):
    n_steps, n_offsets = target_ids.shape
    n_cols = matrix.shape[1]
    for t in range(n_steps):
        mass = 0.0
        for c in range(n_cols):
            if keep[c]:
                mass += matrix[t, c]
        for k in range(n_offsets):
            target = target_ids[t, k]
            if target < 0 or mass <= 0.0:
                out[t, k] = np.nan
                continue
            acc = 0.0
            for c in range(n_cols):
                if keep[c] and source_ids[c] == target:
                    acc += matrix[t, c]
            out[t, k] = acc / mass


def vocab_projection_batch(matrix, keep, source_ids, target_ids):
    matrix = np.ascontiguousarray(matrix, dtype=np.float64)
    keep = np.ascontiguousarray(keep, dtype=np.bool_)
    source_ids = np.ascontiguousarray(source_ids, dtype=np.int64)
    target_ids = np.ascontiguousarray(target_ids, dtype=np.int64)
    out = np.empty(target_ids.shape, dtype=np.float64)
    _vocab_projection(matrix, keep, source_ids, target_ids, out)
    return out
