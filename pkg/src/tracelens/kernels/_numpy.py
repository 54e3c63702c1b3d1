"""Pure-numpy implementations of the hot per-step kernels."""

from __future__ import annotations

import numpy as np

# Slack applied when a cumulative sum is compared against the nucleus target,
# so float rounding at an exact boundary (e.g. uniform 1/n prefixes) cannot
# push the cut one entry late.
CUM_SLACK = 1e-9


def nucleus_entropy_batch(
    probs: np.ndarray, offsets: np.ndarray, p: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nucleus-truncated entropies for a batch of descending distributions.

    probs holds all steps' probabilities concatenated; step s occupies
    probs[offsets[s]:offsets[s+1]]. Returns (entropy, nucleus_size,
    nucleus_mass) arrays, one entry per step. Callers must pre-check that
    every segment's total mass reaches p.
    """
    n = len(offsets) - 1
    out_h = np.empty(n, dtype=np.float64)
    out_size = np.empty(n, dtype=np.int64)
    out_mass = np.empty(n, dtype=np.float64)
    for s in range(n):
        seg = probs[offsets[s] : offsets[s + 1]]
        cs = np.cumsum(seg)
        total = cs[-1]
        eff = p if p < total else total
        pos = int(np.searchsorted(cs, eff - CUM_SLACK, side="left"))
        if pos >= len(seg):
            pos = len(seg) - 1
        mass = cs[pos]
        kept = seg[: pos + 1] / mass
        out_h[s] = -float(np.sum(kept * np.log(kept))) + 0.0
        out_size[s] = pos + 1
        out_mass[s] = mass
    return out_h, out_size, out_mass


def blocked_row_entropies(
    matrix: np.ndarray, keep: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Entropy of each row after dropping blocked columns and renormalizing.

    Returns (entropy, kept_mass). Rows whose kept mass is ~0 get entropy 0;
    callers decide whether that is an error.
    """
    sub = matrix[:, keep]
    mass = sub.sum(axis=1)
    safe = np.where(mass > 0.0, mass, 1.0)
    q = sub / safe[:, None]
    contrib = np.where(q > 0.0, q * np.log(np.where(q > 0.0, q, 1.0)), 0.0)
    h = -contrib.sum(axis=1) + 0.0
    return np.where(mass > 0.0, h, 0.0), mass


def vocab_projection_batch(
    matrix: np.ndarray,
    keep: np.ndarray,
    source_ids: np.ndarray,
    target_ids: np.ndarray,
) -> np.ndarray:
    """Per-step attention mass on source positions matching each target id.

    target_ids is (steps, offsets); entries < 0 mean "no target at this
    offset" and produce NaN. Rows are renormalized over unblocked columns.
    """
    n_steps, n_offsets = target_ids.shape
    kept = matrix * keep[None, :]
    mass = kept.sum(axis=1)
    safe = np.where(mass > 0.0, mass, 1.0)
    out = np.empty((n_steps, n_offsets), dtype=np.float64)
    for k in range(n_offsets):
        targets = target_ids[:, k]
        match = keep[None, :] & (source_ids[None, :] == targets[:, None])
        proj = (matrix * match).sum(axis=1) / safe
        out[:, k] = np.where((targets >= 0) & (mass > 0.0), proj, np.nan)
    return out
