"""Constituency-tree processing: bracketed parsing, syntactic distance between
adjacent words, entropy change at constituent boundaries, and production-rule
entropy tables.

Syntactic distance is the number of parentheses strictly between two adjacent
leaves in the linearized tree. When a tree is in preterminal-normal form
(every leaf sits under a unary POS node) the POS layer is stripped first, so
words sharing an immediate parent get distance zero; trees with bare leaves
are counted as-is.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import AlignmentFailure, EmptyTree, UnbalancedBrackets

PCT_CHANGE_EPS = 1e-6
PCT_CHANGE_CAP = 1e4
DEFAULT_MIN_RULE_COUNT = 5

_LEAF_ESCAPES = {
    "-LRB-": "(",
    "-RRB-": ")",
    "-LCB-": "{",
    "-RCB-": "}",
    "-LSB-": "[",
    "-RSB-": "]",
}
_LEAF_UNESCAPES = {v: k for k, v in _LEAF_ESCAPES.items()}


@dataclass
class TreeNode:
    """Internal node of a constituency tree; children are nodes or leaf strings."""

    label: str
    children: list["TreeNode | str"]

    def is_preterminal(self) -> bool:
        return len(self.children) == 1 and isinstance(self.children[0], str)

    def leaves(self) -> list[str]:
        out: list[str] = []
        _collect_leaves(self, out)
        return out


def _collect_leaves(node: TreeNode, out: list[str]) -> None:
    for child in node.children:
        if isinstance(child, str):
            out.append(child)
        else:
            _collect_leaves(child, out)


# ---------------------------------------------------------------------------
# Parsing / linearization


def _tokenize(text: str) -> list[str]:
    tokens: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in "()":
            tokens.append(ch)
            i += 1
        elif ch.isspace():
            i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "()":
                j += 1
            tokens.append(text[i:j])
            i = j
    return tokens


def parse_bracketed_tree(text: str) -> TreeNode:
    """Parse one Penn-style bracketed tree.

    Escaped bracket tokens (-LRB-, -RRB-, ...) become literal brackets in leaf
    text. Raises EmptyTree for blank input and UnbalancedBrackets for any
    structural mismatch.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise EmptyTree("no content in tree string")
    if tokens[0] != "(":
        raise UnbalancedBrackets("tree must start with '('")
    node, pos = _parse_node(tokens, 0)
    if pos != len(tokens):
        raise UnbalancedBrackets(f"trailing content after tree: {tokens[pos:]!r}")
    return node


def _parse_node(tokens: list[str], pos: int) -> tuple[TreeNode, int]:
    # caller guarantees tokens[pos] == "("
    pos += 1
    label = ""
    if pos < len(tokens) and tokens[pos] not in "()":
        label = tokens[pos]
        pos += 1
    children: list[TreeNode | str] = []
    while True:
        if pos >= len(tokens):
            raise UnbalancedBrackets("unexpected end of input, missing ')'")
        tok = tokens[pos]
        if tok == ")":
            pos += 1
            break
        if tok == "(":
            child, pos = _parse_node(tokens, pos)
            children.append(child)
        else:
            children.append(_LEAF_ESCAPES.get(tok, tok))
            pos += 1
    if not children and not label:
        raise EmptyTree("empty bracket pair '()'")
    if not children:
        # "(NN)" style: treat the label as a bare leaf under an unlabeled node
        raise EmptyTree(f"node {label!r} has no children")
    return TreeNode(label=label, children=children), pos


def linearize(tree: TreeNode) -> str:
    """Render a tree back to single-line bracket notation, re-escaping any
    literal brackets inside leaf text."""
    parts: list[str] = []
    _linearize(tree, parts)
    return " ".join(parts)


def _linearize(node: TreeNode, parts: list[str]) -> None:
    parts.append("(" + node.label if node.label else "(")
    for child in node.children:
        if isinstance(child, str):
            parts.append(_LEAF_UNESCAPES.get(child, child))
        else:
            _linearize(child, parts)
    parts.append(")")


# ---------------------------------------------------------------------------
# Preterminal stripping and syntactic distance


def is_preterminal_normal(tree: TreeNode) -> bool:
    """True when every leaf hangs under its own unary (POS) node."""
    return _normal(tree)


def _normal(node: TreeNode) -> bool:
    if node.is_preterminal():
        return True
    for child in node.children:
        if isinstance(child, str):
            return False
        if not _normal(child):
            return False
    return True


def strip_preterminals(tree: TreeNode) -> TreeNode:
    """Replace each POS-over-leaf node by its leaf when the tree is in
    preterminal-normal form; other trees are returned as a plain copy. The
    root itself is never stripped."""
    if not is_preterminal_normal(tree) or tree.is_preterminal():
        return _copy(tree)
    return _strip(tree)


def _copy(node: TreeNode) -> TreeNode:
    return TreeNode(
        label=node.label,
        children=[c if isinstance(c, str) else _copy(c) for c in node.children],
    )


def _strip(node: TreeNode) -> TreeNode:
    children: list[TreeNode | str] = []
    for child in node.children:
        assert isinstance(child, TreeNode)
        if child.is_preterminal():
            children.append(child.children[0])  # type: ignore[arg-type]
        else:
            children.append(_strip(child))
    return TreeNode(label=node.label, children=children)


def syntactic_distances(tree: TreeNode, *, strip: bool = True) -> list[int]:
    """Bracket count strictly between each pair of adjacent leaves.

    Equals depth(left) + depth(right) - 2*depth(lowest common ancestor) in
    the (optionally preterminal-stripped) tree: the parentheses closed after
    the left leaf plus those opened before the right one.
    """
    work = strip_preterminals(tree) if strip else tree
    chains: list[list[int]] = []
    _ancestor_chains(work, [id(work)], chains)
    distances = []
    for left, right in zip(chains, chains[1:]):
        common = 0
        for a, b in zip(left, right):
            if a != b:
                break
            common += 1
        distances.append((len(left) - common) + (len(right) - common))
    return distances


def _ancestor_chains(node: TreeNode, path: list[int], out: list[list[int]]) -> None:
    for child in node.children:
        if isinstance(child, str):
            out.append(list(path))
        else:
            path.append(id(child))
            _ancestor_chains(child, path, out)
            path.pop()


# ---------------------------------------------------------------------------
# Word/leaf alignment


def align_words_to_leaves(
    word_texts: Sequence[str], leaf_texts: Sequence[str]
) -> list[tuple[int, int]]:
    """Map each word to the half-open leaf span whose concatenation spells it.

    External parsers retokenize, so a word may span several leaves. Raises
    AlignmentFailure when no greedy concatenation reproduces the words.
    """
    words = [" ".join(w.split()) for w in word_texts]
    leaves = [" ".join(l.split()) for l in leaf_texts]
    spans: list[tuple[int, int]] = []
    j = 0
    for i, word in enumerate(words):
        start = j
        acc = ""
        while j < len(leaves) and len(acc) < len(word):
            acc += leaves[j]
            j += 1
        if acc != word:
            raise AlignmentFailure(
                f"word {i} ({word!r}) does not match leaves {leaves[start:j]!r}"
            )
        spans.append((start, j))
    if j != len(leaves):
        raise AlignmentFailure(f"{len(leaves) - j} unconsumed leaves after last word")
    return spans


# ---------------------------------------------------------------------------
# Entropy change at word boundaries


@dataclass(frozen=True)
class DistanceRecord:
    boundary_index: int
    distance: int
    entropy_change_pct: float


@dataclass(frozen=True)
class DistanceGroup:
    distance: int
    median_pct: float
    mean_pct: float
    count: int


@dataclass(frozen=True)
class DistanceStats:
    groups: tuple[DistanceGroup, ...]
    spearman: float | None
    boundaries: int
    skipped_sentences: int


def pct_change(h_from: float, h_to: float) -> float:
    """Percent entropy change with an epsilon-guarded denominator, capped so
    near-zero copy-step entropies cannot blow up the scale."""
    raw = 100.0 * (h_to - h_from) / max(h_from, PCT_CHANGE_EPS)
    return float(np.clip(raw, -PCT_CHANGE_CAP, PCT_CHANGE_CAP))


def sentence_distance_deltas(
    tree: TreeNode,
    word_texts: Sequence[str],
    word_entropies: Sequence[float],
    *,
    strip: bool = True,
) -> list[DistanceRecord]:
    """Per word boundary of one sentence: syntactic distance and percent
    entropy change. Raises AlignmentFailure when the tree does not match."""
    if len(word_texts) != len(word_entropies):
        raise ValueError("one entropy per word required")
    leaf_texts = tree.leaves()
    spans = align_words_to_leaves(word_texts, leaf_texts)
    leaf_distances = syntactic_distances(tree, strip=strip)
    records = []
    for i in range(len(word_texts) - 1):
        boundary_leaf = spans[i][1] - 1  # last leaf of word i
        records.append(
            DistanceRecord(
                boundary_index=i,
                distance=leaf_distances[boundary_leaf],
                entropy_change_pct=pct_change(word_entropies[i], word_entropies[i + 1]),
            )
        )
    return records


def group_distance_stats(
    pairs_by_distance: dict[int, Sequence[float]],
    skipped_sentences: int = 0,
) -> DistanceStats:
    """Aggregate (distance -> percent changes) into medians, means and the
    overall rank correlation between distance and change."""
    groups = []
    flat_d: list[float] = []
    flat_v: list[float] = []
    for dist in sorted(pairs_by_distance):
        vals = np.asarray(pairs_by_distance[dist], dtype=np.float64)
        if not len(vals):
            continue
        groups.append(
            DistanceGroup(
                distance=dist,
                median_pct=float(np.median(vals)),
                mean_pct=float(np.mean(vals)),
                count=len(vals),
            )
        )
        flat_d.extend([float(dist)] * len(vals))
        flat_v.extend(vals.tolist())
    return DistanceStats(
        groups=tuple(groups),
        spearman=spearman(flat_d, flat_v),
        boundaries=len(flat_d),
        skipped_sentences=skipped_sentences,
    )


def spearman(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Spearman rank correlation with average ranks for ties; None when
    undefined (fewer than two pairs or a constant side)."""
    if len(x) != len(y):
        raise ValueError("x and y must pair up")
    if len(x) < 2:
        return None
    rx = _rankdata(np.asarray(x, dtype=np.float64))
    ry = _rankdata(np.asarray(y, dtype=np.float64))
    sx = rx.std()
    sy = ry.std()
    if sx == 0.0 or sy == 0.0:
        return None
    return float(((rx - rx.mean()) * (ry - ry.mean())).mean() / (sx * sy))


def _rankdata(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


# ---------------------------------------------------------------------------
# Production-rule entropy table


@dataclass(frozen=True)
class ProductionStat:
    rule: str
    child_means: tuple[float, ...]
    mean_entropy: float
    count: int


def collect_productions(
    tree: TreeNode, word_entropies: Sequence[float]
) -> list[tuple[str, tuple[float, ...]]]:
    """Every non-preterminal production in a sentence with the mean word
    entropy of each child constituent. Leaves must align 1:1 per position in
    the word-entropy vector (call after leaf/word alignment when needed)."""
    out: list[tuple[str, tuple[float, ...]]] = []
    _walk_productions(tree, 0, np.asarray(word_entropies, dtype=np.float64), out)
    return out


def _walk_productions(
    node: TreeNode,
    leaf_offset: int,
    entropies: np.ndarray,
    out: list[tuple[str, tuple[float, ...]]],
) -> int:
    """Returns the number of leaves under node; appends (rule, child means)."""
    if node.is_preterminal():
        return 1
    labels: list[str] = []
    child_means: list[float] = []
    offset = leaf_offset
    for child in node.children:
        if isinstance(child, str):
            labels.append(child)
            child_means.append(float(entropies[offset]))
            offset += 1
        else:
            width = _walk_productions(child, offset, entropies, out)
            labels.append(child.label)
            child_means.append(float(np.mean(entropies[offset : offset + width])))
            offset += width
    rule = f"{node.label} -> {' '.join(labels)}"
    out.append((rule, tuple(child_means)))
    return offset - leaf_offset


def production_table(
    occurrences: dict[str, Sequence[tuple[float, ...]]],
    min_count: int = 1,
) -> list[ProductionStat]:
    """Aggregate rule occurrences into per-rule statistics sorted by mean
    entropy, highest first."""
    stats = []
    for rule, occ in occurrences.items():
        if len(occ) < min_count:
            continue
        arr = np.asarray(occ, dtype=np.float64)
        child_means = tuple(float(v) for v in arr.mean(axis=0))
        stats.append(
            ProductionStat(
                rule=rule,
                child_means=child_means,
                mean_entropy=float(arr.mean(axis=1).mean()),
                count=len(occ),
            )
        )
    stats.sort(key=lambda s: (-s.mean_entropy, s.rule))
    return stats


# ---------------------------------------------------------------------------
# Whole-corpus conveniences (streaming pipelines use the per-sentence pieces)


def entropy_change_by_distance(
    sentence_items: Iterable[tuple[TreeNode, Sequence[str], Sequence[float]]],
    *,
    strip: bool = True,
) -> DistanceStats:
    """Grouped entropy-change statistics over (tree, words, entropies)
    sentences; sentences whose trees cannot be aligned are skipped and
    counted."""
    by_distance: dict[int, list[float]] = {}
    skipped = 0
    for tree, word_texts, word_entropies in sentence_items:
        try:
            records = sentence_distance_deltas(
                tree, word_texts, word_entropies, strip=strip
            )
        except AlignmentFailure:
            skipped += 1
            continue
        for rec in records:
            by_distance.setdefault(rec.distance, []).append(rec.entropy_change_pct)
    return group_distance_stats(by_distance, skipped_sentences=skipped)


def production_entropy_table(
    sentence_items: Iterable[tuple[TreeNode, Sequence[str], Sequence[float]]],
    *,
    min_count: int = 1,
) -> list[ProductionStat]:
    """Production-rule entropy statistics over (tree, words, entropies)
    sentences, skipping unalignable trees."""
    occurrences: dict[str, list[tuple[float, ...]]] = {}
    for tree, word_texts, word_entropies in sentence_items:
        try:
            spans = align_words_to_leaves(word_texts, tree.leaves())
        except AlignmentFailure:
            continue
        per_leaf = leaf_entropies(spans, word_entropies, len(tree.leaves()))
        for rule, child_means in collect_productions(tree, per_leaf):
            occurrences.setdefault(rule, []).append(child_means)
    return production_table(occurrences, min_count=min_count)


def leaf_entropies(
    word_spans: Sequence[tuple[int, int]],
    word_entropies: Sequence[float],
    num_leaves: int,
) -> np.ndarray:
    """Spread word entropies onto leaves so multi-leaf words keep their value."""
    out = np.empty(num_leaves, dtype=np.float64)
    for entropy, (a, b) in zip(word_entropies, word_spans):
        out[a:b] = entropy
    return out
