"""Copy-vs-novel bigram typing and entropy profiles over sentence position.

A generated word is an "existing" bigram when it and its predecessor occur as
consecutive words anywhere in the source document, and "novel" otherwise; the
first word of a summary has no predecessor and stays unlabeled. Each bigram
carries the entropy of the step that emitted the second word's first piece.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .trace import WordSequence

NUM_POSITION_BUCKETS = 10
DEFAULT_BIN_WIDTH = 0.25
DEFAULT_TRUNCATE_AT = 5.0


class Label(str, enum.Enum):
    EXISTING = "existing"
    NOVEL = "novel"
    UNDEFINED = "undefined"


@dataclass(frozen=True)
class BigramLabel:
    word_index: int
    label: Label
    entropy: float | None = None


@dataclass(frozen=True)
class EntropyHistogram:
    bin_width: float
    truncate_at: float
    counts: dict[Label, np.ndarray]
    medians: dict[Label, float | None]

    @property
    def num_bins(self) -> int:
        return len(next(iter(self.counts.values())))


@dataclass(frozen=True)
class PositionProfile:
    """Per-decile mean/median entropy; empty buckets carry NaN and count 0."""

    means: np.ndarray
    medians: np.ndarray
    counts: np.ndarray


def classify_bigrams(
    words: WordSequence,
    source_words: Sequence[str],
    *,
    case_fold: bool = False,
    step_entropies: Sequence[float] | np.ndarray | None = None,
) -> list[BigramLabel]:
    """Label each generated word by whether it extends a source bigram.

    Matching is an exact string comparison of consecutive word pairs, after
    optional case folding. When step_entropies is given, each label carries
    the entropy of the word's first generation step.
    """
    texts = [w.text for w in words.words]
    if case_fold:
        texts = [t.lower() for t in texts]
        source = [s.lower() for s in source_words]
    else:
        source = list(source_words)
    source_pairs = set(zip(source, source[1:]))
    labels = []
    for i, word in enumerate(words.words):
        if i == 0:
            label = Label.UNDEFINED
        elif (texts[i - 1], texts[i]) in source_pairs:
            label = Label.EXISTING
        else:
            label = Label.NOVEL
        ent = None
        if step_entropies is not None:
            ent = float(step_entropies[word.first_step])
        labels.append(BigramLabel(word_index=i, label=label, entropy=ent))
    return labels


def copy_entropy_histogram(
    labels: Sequence[BigramLabel],
    bin_width: float = DEFAULT_BIN_WIDTH,
    truncate_at: float = DEFAULT_TRUNCATE_AT,
) -> EntropyHistogram:
    """Bin labeled-bigram entropies by class; values past truncate_at pile
    into the final bin while medians stay exact on the untruncated values."""
    if bin_width <= 0 or truncate_at <= 0:
        raise ValueError("bin_width and truncate_at must be positive")
    values = {Label.EXISTING: [], Label.NOVEL: []}
    for item in labels:
        if item.label is Label.UNDEFINED:
            continue
        if item.entropy is None:
            raise ValueError(f"bigram at word {item.word_index} carries no entropy")
        values[item.label].append(item.entropy)
    return histogram_from_values(
        {k: np.asarray(v, dtype=np.float64) for k, v in values.items()},
        bin_width,
        truncate_at,
    )


def histogram_from_values(
    values: dict[Label, np.ndarray],
    bin_width: float = DEFAULT_BIN_WIDTH,
    truncate_at: float = DEFAULT_TRUNCATE_AT,
) -> EntropyHistogram:
    num_bins = max(1, math.ceil(truncate_at / bin_width - 1e-9))
    counts: dict[Label, np.ndarray] = {}
    medians: dict[Label, float | None] = {}
    for label, vals in values.items():
        binned = np.zeros(num_bins, dtype=np.int64)
        if len(vals):
            idx = np.minimum((vals / bin_width).astype(np.int64), num_bins - 1)
            np.add.at(binned, idx, 1)
            medians[label] = float(np.median(vals))
        else:
            medians[label] = None
        counts[label] = binned
    return EntropyHistogram(
        bin_width=bin_width, truncate_at=truncate_at, counts=counts, medians=medians
    )


def relative_positions(words: WordSequence) -> np.ndarray:
    """Relative-position decile of every word within its sentence: word i of
    an n-word sentence maps to floor(10*i/n)/10, one of 0.0 ... 0.9."""
    if not words.sentence_spans:
        raise ValueError("word sequence has no sentence spans; segment first")
    buckets = np.empty(len(words.words), dtype=np.float64)
    for a, b in words.sentence_spans:
        n = b - a
        for i in range(n):
            buckets[a + i] = ((NUM_POSITION_BUCKETS * i) // n) / 10.0
    return buckets


def decile_index(bucket: float) -> int:
    """Map a decile value (0.0 ... 0.9) back to its array index."""
    return int(round(bucket * 10.0))


def position_entropy_profile(
    buckets: Sequence[float] | np.ndarray,
    entropies: Sequence[float] | np.ndarray,
) -> PositionProfile:
    """Mean, median and count of word entropies per relative-position decile.
    Arrays index deciles 0.0 ... 0.9 in order."""
    buckets = np.asarray(buckets, dtype=np.float64)
    entropies = np.asarray(entropies, dtype=np.float64)
    if buckets.shape != entropies.shape:
        raise ValueError("buckets and entropies must align one per word")
    indices = np.round(buckets * 10.0).astype(np.int64)
    means = np.full(NUM_POSITION_BUCKETS, np.nan)
    medians = np.full(NUM_POSITION_BUCKETS, np.nan)
    counts = np.zeros(NUM_POSITION_BUCKETS, dtype=np.int64)
    for b in range(NUM_POSITION_BUCKETS):
        vals = entropies[indices == b]
        counts[b] = len(vals)
        if len(vals):
            means[b] = float(np.mean(vals))
            medians[b] = float(np.median(vals))
    return PositionProfile(means=means, medians=medians, counts=counts)
