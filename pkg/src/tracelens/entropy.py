"""Nucleus truncation and entropy of next-token prediction distributions.

All entropies are in nats. Prediction entropy is computed over the
renormalized top-p nucleus: the shortest descending-probability prefix whose
cumulative mass reaches p, each kept probability divided by the kept mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import InsufficientMass, NotNormalized
from .trace import TraceDocument

DEFAULT_NUCLEUS_P = 0.95

# A stored distribution may fall short of p by at most this before it is an error.
_MASS_SHORTFALL_TOL = 1e-6
# Slack for cumulative-sum comparisons at exact nucleus boundaries.
_CUM_SLACK = 1e-9


@dataclass(frozen=True)
class NucleusDistribution:
    """The renormalized top-p distribution of one prediction step."""

    entries: tuple[tuple[int, float], ...]
    nucleus_mass: float
    nucleus_size: int


def nucleus_truncate(
    topk: Sequence[tuple[int, float]], p: float
) -> NucleusDistribution:
    """Truncate a descending (token_id, probability) list to its p-nucleus.

    Ties in probability are broken by ascending token id. If the stored mass
    cannot reach p the trace kept too little of the distribution and
    InsufficientMass is raised; when p exceeds the total by no more than the
    tolerance, the whole list is kept and renormalized by its sum.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    if not topk:
        raise ValueError("empty distribution")
    ordered = sorted(topk, key=lambda pair: (-pair[1], pair[0]))
    probs = [prob for _, prob in ordered]
    if any(prob <= 0.0 for prob in probs):
        raise ValueError("probabilities must be positive")
    total = math.fsum(probs)
    if total < p - _MASS_SHORTFALL_TOL:
        raise InsufficientMass(f"stored mass {total:.6f} < requested nucleus p={p}")
    effective = min(p, total)
    cum = 0.0
    cut = len(ordered)
    for i, prob in enumerate(probs):
        cum += prob
        if cum >= effective - _CUM_SLACK:
            cut = i + 1
            break
    mass = cum
    entries = tuple((tok, prob / mass) for tok, prob in ordered[:cut])
    return NucleusDistribution(entries=entries, nucleus_mass=mass, nucleus_size=cut)


def entropy(probs: Sequence[float] | np.ndarray) -> float:
    """Shannon entropy (natural log) of a distribution summing to 1.

    Zero entries contribute nothing; a sum off by more than 1e-6 or any
    negative entry raises NotNormalized.
    """
    arr = np.asarray(probs, dtype=np.float64)
    if arr.ndim != 1:
        raise NotNormalized("expected a flat probability vector")
    if np.any(arr < 0.0):
        raise NotNormalized("probabilities must be non-negative")
    total = math.fsum(arr.tolist())
    if abs(total - 1.0) > _MASS_SHORTFALL_TOL:
        raise NotNormalized(f"probabilities sum to {total}, expected 1")
    positive = arr[arr > 0.0]
    return float(-(positive * np.log(positive)).sum()) + 0.0


def nucleus_entropy(topk: Sequence[tuple[int, float]], p: float) -> float:
    """Entropy of the renormalized p-nucleus of one stored distribution."""
    dist = nucleus_truncate(topk, p)
    return entropy([prob for _, prob in dist.entries])


def prediction_entropies(
    doc: TraceDocument, p: float = DEFAULT_NUCLEUS_P
) -> np.ndarray:
    """Per-step nucleus entropies for a whole document (hot path).

    Equivalent to entropy(nucleus_truncate(step.topk, p)) per step but runs
    through the batch kernel. Raises InsufficientMass with the offending step
    index when a step stored less mass than p.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    if not doc.steps:
        return np.empty(0, dtype=np.float64)
    lengths = [len(step.topk) for step in doc.steps]
    offsets = np.zeros(len(lengths) + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    flat = np.empty(offsets[-1], dtype=np.float64)
    for i, step in enumerate(doc.steps):
        flat[offsets[i] : offsets[i + 1]] = [prob for _, prob in step.topk]
    for i, step in enumerate(doc.steps):
        stored = math.fsum(prob for _, prob in step.topk)
        if stored < p - _MASS_SHORTFALL_TOL:
            raise InsufficientMass(
                f"step {i}: stored mass {stored:.6f} < requested nucleus p={p}",
                step_index=i,
            )
    values, _, _ = kernels.nucleus_entropy_batch(flat, offsets, float(p))
    return values
