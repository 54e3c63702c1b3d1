"""Aggregate cross-attention analysis: row normalization, blocking of
over-attended source tokens, attention entropy, and vocabulary-projected
attention.

The input matrix holds one row per decoding step and one column per source
position, already summed over all heads and layers by the producer. Rows are
normalized before any thresholding because the summed scale is otherwise
arbitrary. Blocking discards the ceil(fraction*L) columns most often attended
above a threshold q (default 10/L), mimicking removal of low-information
tokens such as boilerplate markers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import AllBlockedMass, ZeroRow
from .trace import TraceDocument

DEFAULT_BLOCK_FRACTION = 0.05
DEFAULT_BUCKET_WIDTH = 0.25
PROJECTION_OFFSETS = (-2, -1, 0, 1)

# Epsilon for ceil(fraction * L) so exact integer products do not round up.
_CEIL_EPS = 1e-9
_MIN_KEPT_MASS = 1e-9


@dataclass(frozen=True)
class AggregateAttention:
    matrix: np.ndarray
    normalized: bool = False

    @property
    def num_steps(self) -> int:
        return self.matrix.shape[0]

    @property
    def source_len(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class BlockSet:
    """Source positions discarded from attention analysis."""

    blocked: tuple[int, ...]
    scores: np.ndarray  # per-position count of steps attending >= q
    q: float
    fraction: float

    def keep_mask(self, source_len: int) -> np.ndarray:
        mask = np.ones(source_len, dtype=bool)
        mask[list(self.blocked)] = False
        return mask


def doc_attention(doc: TraceDocument) -> AggregateAttention:
    """Stack a document's attention rows into a steps-by-source matrix."""
    if not doc.steps:
        return AggregateAttention(np.zeros((0, doc.source_len)), normalized=False)
    return AggregateAttention(
        np.vstack([step.attention_row for step in doc.steps]), normalized=False
    )


def normalize_rows(att: AggregateAttention) -> AggregateAttention:
    """Divide each row by its sum. Idempotent; a zero row is an error."""
    if att.normalized:
        return att
    if np.any(att.matrix < 0):
        raise ValueError("attention entries must be non-negative")
    sums = att.matrix.sum(axis=1)
    zero = np.flatnonzero(sums == 0.0)
    if len(zero):
        raise ZeroRow(f"attention row {zero[0]} sums to zero", row_index=int(zero[0]))
    return AggregateAttention(att.matrix / sums[:, None], normalized=True)


def default_q(source_len: int) -> float:
    """Ten times the uniform row mass; entries this large mark a position as
    attended for blocking purposes."""
    return 10.0 / source_len


def compute_block_set(
    att: AggregateAttention, q: float, fraction: float
) -> BlockSet:
    """Block the ceil(fraction*L) columns with the highest attended-step
    counts; ties broken by higher column mass, then lower position."""
    if not att.normalized:
        raise ValueError("attention must be row-normalized before blocking")
    if q <= 0:
        raise ValueError("q must be positive")
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    matrix = att.matrix
    source_len = att.source_len
    scores = (matrix >= q).sum(axis=0).astype(np.int64)
    masses = matrix.sum(axis=0)
    n_blocked = int(math.ceil(fraction * source_len - _CEIL_EPS))
    order = np.lexsort((np.arange(source_len), -masses, -scores))
    blocked = tuple(sorted(int(i) for i in order[:n_blocked]))
    return BlockSet(blocked=blocked, scores=scores, q=q, fraction=fraction)


def attention_entropy(
    row: Sequence[float] | np.ndarray, block_set: BlockSet | None = None
) -> float:
    """Entropy (nats) of one normalized attention row after removing blocked
    columns and renormalizing; pass block_set=None for the raw row."""
    arr = np.asarray(row, dtype=np.float64)
    if block_set is not None:
        arr = arr[block_set.keep_mask(len(arr))]
    mass = arr.sum()
    if mass < _MIN_KEPT_MASS:
        raise AllBlockedMass("blocking removed essentially all attention mass")
    q = arr[arr > 0.0] / mass
    return float(-(q * np.log(q)).sum()) + 0.0


def attention_entropies(
    att: AggregateAttention, block_set: BlockSet | None = None
) -> np.ndarray:
    """Blocked-and-renormalized entropy of every row (hot path)."""
    if not att.normalized:
        raise ValueError("normalize rows first")
    if block_set is None:
        keep = np.ones(att.source_len, dtype=bool)
    else:
        keep = block_set.keep_mask(att.source_len)
    values, masses = kernels.blocked_row_entropies(att.matrix, keep)
    starved = np.flatnonzero(masses < _MIN_KEPT_MASS)
    if len(starved):
        raise AllBlockedMass(
            f"attention row {starved[0]} lost all mass to blocking",
            row_index=int(starved[0]),
        )
    return values


def projection_targets(doc: TraceDocument) -> np.ndarray:
    """(steps, 4) matrix of output token ids at offsets -2, -1, 0, +1 relative
    to each step; -1 marks offsets that fall outside the document."""
    ids = [step.output_token_id for step in doc.steps]
    n = len(ids)
    out = np.full((n, len(PROJECTION_OFFSETS)), -1, dtype=np.int64)
    for t in range(n):
        for k, off in enumerate(PROJECTION_OFFSETS):
            u = t + off
            if 0 <= u < n:
                out[t, k] = ids[u]
    return out


def vocabulary_projections(
    doc: TraceDocument,
    att: AggregateAttention,
    block_set: BlockSet | None = None,
) -> np.ndarray:
    """Per step and offset, the renormalized unblocked attention mass landing
    on source positions whose token id equals the offset's output token.
    NaN marks offsets outside the document."""
    if not att.normalized:
        raise ValueError("normalize rows first")
    if block_set is None:
        keep = np.ones(att.source_len, dtype=bool)
    else:
        keep = block_set.keep_mask(att.source_len)
    source_ids = np.asarray([t.token_id for t in doc.source_tokens], dtype=np.int64)
    return kernels.vocab_projection_batch(
        att.matrix, keep, source_ids, projection_targets(doc)
    )


@dataclass(frozen=True)
class BucketMeans:
    """Mean of a quantity grouped by prediction-entropy bucket."""

    bucket_width: float
    buckets: np.ndarray  # occupied bucket indices, ascending
    means: np.ndarray
    counts: np.ndarray


def entropy_buckets(prediction_entropies: np.ndarray, bucket_width: float) -> np.ndarray:
    if bucket_width <= 0:
        raise ValueError("bucket_width must be positive")
    return np.floor(prediction_entropies / bucket_width).astype(np.int64)


def bucket_means(
    bucket_indices: np.ndarray, values: np.ndarray, bucket_width: float
) -> BucketMeans:
    valid = ~np.isnan(values)
    idx = bucket_indices[valid]
    vals = values[valid]
    occupied = np.unique(idx)
    means = np.empty(len(occupied))
    counts = np.empty(len(occupied), dtype=np.int64)
    for i, b in enumerate(occupied):
        group = vals[idx == b]
        means[i] = float(np.mean(group))
        counts[i] = len(group)
    return BucketMeans(
        bucket_width=bucket_width, buckets=occupied, means=means, counts=counts
    )


def attention_vs_prediction(
    docs,
    *,
    nucleus_p: float = 0.95,
    bucket_width: float = DEFAULT_BUCKET_WIDTH,
    q: float | None = None,
    fraction: float = DEFAULT_BLOCK_FRACTION,
) -> BucketMeans:
    """Mean attention entropy per prediction-entropy bucket over documents."""
    from .entropy import prediction_entropies

    all_buckets: list[np.ndarray] = []
    all_values: list[np.ndarray] = []
    for doc in docs:
        att = normalize_rows(doc_attention(doc))
        block = compute_block_set(
            att, q if q is not None else default_q(att.source_len), fraction
        )
        pred = prediction_entropies(doc, nucleus_p)
        all_buckets.append(entropy_buckets(pred, bucket_width))
        all_values.append(attention_entropies(att, block))
    if not all_buckets:
        return BucketMeans(
            bucket_width=bucket_width,
            buckets=np.empty(0, dtype=np.int64),
            means=np.empty(0),
            counts=np.empty(0, dtype=np.int64),
        )
    return bucket_means(
        np.concatenate(all_buckets), np.concatenate(all_values), bucket_width
    )


def vocabulary_projection(
    docs,
    *,
    nucleus_p: float = 0.95,
    bucket_width: float = DEFAULT_BUCKET_WIDTH,
    q: float | None = None,
    fraction: float = DEFAULT_BLOCK_FRACTION,
) -> dict[int, BucketMeans]:
    """Mean vocabulary-projected attention per prediction-entropy bucket,
    one curve per offset in (-2, -1, 0, +1)."""
    from .entropy import prediction_entropies

    buckets_acc: list[np.ndarray] = []
    proj_acc: list[np.ndarray] = []
    for doc in docs:
        att = normalize_rows(doc_attention(doc))
        block = compute_block_set(
            att, q if q is not None else default_q(att.source_len), fraction
        )
        pred = prediction_entropies(doc, nucleus_p)
        buckets_acc.append(entropy_buckets(pred, bucket_width))
        proj_acc.append(vocabulary_projections(doc, att, block))
    curves: dict[int, BucketMeans] = {}
    if not buckets_acc:
        return curves
    buckets = np.concatenate(buckets_acc)
    projections = np.concatenate(proj_acc, axis=0)
    for k, off in enumerate(PROJECTION_OFFSETS):
        curves[off] = bucket_means(buckets, projections[:, k], bucket_width)
    return curves
