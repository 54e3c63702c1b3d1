"""Deterministic synthetic trace generator for desk-scale testing.

Each document interleaves two kinds of steps. Copy steps continue a walk
along consecutive source words with a two-entry nucleus (near-one-hot topk)
and an attention row peaked on the copied source position. Novel steps emit
fresh out-of-source words with a flat k-entry nucleus and diffuse attention.

Copy steps occupy the tail of every sentence, so word entropies decrease
strictly with the relative-position decile by construction; a handful of
"hub" source positions receive enough attention from every step that the
default blocking configuration discards exactly them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfig
from .syntax import TreeNode, linearize
from .trace import SourceToken, StepRecord, TraceDocument

STORED_MASS = 0.995
HUB_MASS = 0.6
CRUMB = 0.002
_CEIL_EPS = 1e-9

_NONTERMINALS = ("NP", "VP", "PP", "ADJP", "ADVP", "SBAR")
_PRETERMINALS = ("NN", "VB", "DT", "JJ", "RB", "CD")


@dataclass(frozen=True)
class SynthConfig:
    """Shape and planted entropy levels of one synthetic document.

    copy_fraction targets the rate of copy-labeled (existing) bigrams the
    document will exhibit; one extra copy step per sentence compensates for
    the run-opening copy whose predecessor is a novel word. copy_entropy and
    novel_entropy set the approximate centers of the per-decile entropy
    curves planted for the two step kinds.
    """

    sentences: int = 10
    words_per_sentence: int = 10
    copy_fraction: float = 0.5
    copy_entropy: float = 0.1
    novel_entropy: float = 2.9
    source_len: int | None = None
    source_pad: int = 8
    block_fraction: float = 0.05

    @property
    def num_steps(self) -> int:
        return self.sentences * self.words_per_sentence

    def validate(self) -> None:
        if not 0.0 <= self.copy_fraction <= 1.0:
            raise InvalidConfig(f"copy_fraction {self.copy_fraction} outside [0, 1]")
        if not 0.0 < self.block_fraction < 1.0:
            raise InvalidConfig(f"block_fraction {self.block_fraction} outside (0, 1)")
        if self.sentences < 1 or self.words_per_sentence < 1:
            raise InvalidConfig("sentences and words_per_sentence must be >= 1")
        if not 0.01 <= self.copy_entropy <= 0.4:
            raise InvalidConfig("copy_entropy must lie in [0.01, 0.4]")
        if not 2.0 <= self.novel_entropy <= 6.0:
            raise InvalidConfig("novel_entropy must lie in [2.0, 6.0]")
        if self.source_pad < 2:
            raise InvalidConfig("source_pad must be >= 2")


def generate_synthetic(config: SynthConfig, seed: int) -> TraceDocument:
    """Build one fully deterministic synthetic document for a seed."""
    config.validate()
    rng = np.random.default_rng(seed)
    n_steps = config.num_steps
    n_hubs, source_len = _geometry(config)
    content_len = source_len - n_hubs

    source_tokens = _build_source(n_hubs, source_len)
    content_ids = [tok.token_id for tok in source_tokens[n_hubs:]]

    n = config.words_per_sentence
    copies = _copies_per_sentence(config.copy_fraction, n)
    copy_start = n - copies

    copy_prob = _copy_top_probs(config.copy_entropy)
    novel_sizes = _novel_nucleus_sizes(config.novel_entropy)

    ptr = n_hubs + int(rng.integers(0, config.source_pad - 1))
    novel_counter = 0
    steps: list[StepRecord] = []
    words_per_sent: list[list[str]] = []
    for s in range(config.sentences):
        sent_words: list[str] = []
        for j in range(n):
            t = len(steps)
            bucket = (10 * j) // n
            if j >= copy_start:
                token_id = content_ids[ptr - n_hubs]
                piece = f"w{token_id}"
                topk = _two_entry_topk(token_id, copy_prob[bucket])
                row = _copy_attention_row(source_len, n_hubs, ptr)
            else:
                token_id = 10_000_000 + novel_counter
                novel_counter += 1
                piece = f"n{token_id}"
                topk = _flat_topk(token_id, novel_sizes[bucket])
                row = _novel_attention_row(source_len, n_hubs)
            tail = 1.0 - math.fsum(p for _, p in topk)
            steps.append(
                StepRecord(
                    step_index=t,
                    output_token_id=token_id,
                    output_piece=piece,
                    begins_word=True,
                    topk=topk,
                    tail_mass=tail,
                    attention_row=row,
                )
            )
            sent_words.append(piece)
            ptr += 1
        words_per_sent.append(sent_words)

    parses = tuple(linearize(_random_tree(words, rng)) for words in words_per_sent)
    spans = tuple((s * n, (s + 1) * n) for s in range(config.sentences))
    return TraceDocument(
        doc_id=f"synth-{seed:08d}",
        source_tokens=tuple(source_tokens),
        steps=tuple(steps),
        sentence_spans=spans,
        parses=parses,
    )


def synth_corpus(config: SynthConfig, base_seed: int, count: int):
    """Yield `count` documents with per-document seeds base_seed + i."""
    for i in range(count):
        yield generate_synthetic(config, base_seed + i)


# ---------------------------------------------------------------------------
# Geometry and planted curves


def _geometry(config: SynthConfig) -> tuple[int, int]:
    needed = config.num_steps + config.source_pad
    if config.source_len is not None:
        source_len = config.source_len
        n_hubs = int(math.ceil(config.block_fraction * source_len - _CEIL_EPS))
        if source_len - n_hubs < config.num_steps + 2:
            raise InvalidConfig(
                f"source_len {source_len} too small for {config.num_steps} steps"
            )
        return n_hubs, source_len
    source_len = needed
    while True:
        n_hubs = int(math.ceil(config.block_fraction * source_len - _CEIL_EPS))
        if source_len == needed + n_hubs:
            return n_hubs, source_len
        source_len = needed + n_hubs


def _build_source(n_hubs: int, source_len: int) -> list[SourceToken]:
    tokens = [
        SourceToken(position=i, token_id=i, piece=f"<hub{i}>", begins_word=True)
        for i in range(n_hubs)
    ]
    for i in range(n_hubs, source_len):
        token_id = 1000 + i
        tokens.append(
            SourceToken(position=i, token_id=token_id, piece=f"w{token_id}", begins_word=True)
        )
    return tokens


def _copies_per_sentence(fraction: float, n: int) -> int:
    base = int(round(fraction * n))
    if 0.0 < fraction < 1.0:
        base += 1
    return min(max(base, 0), n)


def _binary_entropy(u: float) -> float:
    return -(u * math.log(u) + (1.0 - u) * math.log(1.0 - u))


def _invert_binary_entropy(target: float) -> float:
    """The u >= 0.5 with -u ln u - (1-u) ln(1-u) = target, by bisection."""
    lo, hi = 0.5, 1.0 - 1e-12
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if _binary_entropy(mid) > target:
            lo = mid
        else:
            hi = mid
    return hi


def _copy_top_probs(level: float) -> list[float]:
    """Top probability of the two-entry nucleus per decile; entropy targets
    decrease strictly from 1.5x to 0.5x the configured level."""
    targets = np.linspace(1.5 * level, 0.5 * level, 10)
    return [0.95 * _invert_binary_entropy(float(t)) for t in targets]


def _novel_nucleus_sizes(level: float) -> list[int]:
    """Flat-nucleus support size per decile, strictly decreasing."""
    sizes = []
    prev = None
    for b in range(10):
        k = int(round(math.exp(level + 0.45 - 0.1 * b)))
        if prev is not None and k >= prev:
            k = prev - 1
        k = max(k, 3)
        if prev is not None and k >= prev:
            raise InvalidConfig("novel_entropy too small for ten distinct deciles")
        sizes.append(k)
        prev = k
    return sizes


# ---------------------------------------------------------------------------
# Step construction


def _fillers(extra: float, cap: float) -> list[float]:
    count = int(math.ceil(extra / cap - 1e-12))
    return [extra / count] * count


def _two_entry_topk(winner_id: int, top_prob: float) -> tuple[tuple[int, float], ...]:
    second = 0.95 - top_prob
    entries = [(winner_id, top_prob), (3_000_000, second)]
    for i, f in enumerate(_fillers(STORED_MASS - 0.95, second)):
        entries.append((3_000_001 + i, f))
    return tuple(entries)


def _flat_topk(winner_id: int, size: int) -> tuple[tuple[int, float], ...]:
    share = 0.95 / size
    entries = [(winner_id, share)]
    entries.extend((3_000_000 + i, share) for i in range(size - 1))
    offset = 3_000_000 + size
    for i, f in enumerate(_fillers(STORED_MASS - 0.95, share)):
        entries.append((offset + i, f))
    return tuple(entries)


def _copy_attention_row(source_len: int, n_hubs: int, ptr: int) -> np.ndarray:
    row = np.zeros(source_len, dtype=np.float64)
    row[:n_hubs] = HUB_MASS / n_hubs
    placed = 0.0
    for pos in (ptr - 1, ptr + 1):
        if 0 <= pos < source_len:
            row[pos] += CRUMB
            placed += CRUMB
    row[ptr] += 1.0 - HUB_MASS - placed
    return row


def _novel_attention_row(source_len: int, n_hubs: int) -> np.ndarray:
    row = np.empty(source_len, dtype=np.float64)
    row[:n_hubs] = HUB_MASS / n_hubs
    row[n_hubs:] = (1.0 - HUB_MASS) / (source_len - n_hubs)
    return row


# ---------------------------------------------------------------------------
# Parse trees


def _random_tree(words: list[str], rng: np.random.Generator) -> TreeNode:
    return TreeNode(label="S", children=_tree_children(words, rng, depth=0))


def _tree_children(
    words: list[str], rng: np.random.Generator, depth: int
) -> list[TreeNode | str]:
    if len(words) <= 2 or depth >= 3:
        return [_preterminal(w, rng) for w in words]
    n_parts = 2 if len(words) < 4 or rng.integers(0, 2) == 0 else 3
    cuts = sorted(rng.choice(np.arange(1, len(words)), size=n_parts - 1, replace=False))
    bounds = [0, *[int(c) for c in cuts], len(words)]
    children: list[TreeNode | str] = []
    for a, b in zip(bounds, bounds[1:]):
        part = words[a:b]
        if len(part) == 1:
            children.append(_preterminal(part[0], rng))
        else:
            label = _NONTERMINALS[int(rng.integers(0, len(_NONTERMINALS)))]
            children.append(
                TreeNode(label=label, children=_tree_children(part, rng, depth + 1))
            )
    return children


def _preterminal(word: str, rng: np.random.Generator) -> TreeNode:
    label = _PRETERMINALS[int(rng.integers(0, len(_PRETERMINALS)))]
    return TreeNode(label=label, children=[word])
