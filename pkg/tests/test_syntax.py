"""Tree parsing, syntactic distance (with char-scan oracle), entropy change
grouping, and production tables."""

import numpy as np
import pytest

from tracelens.errors import AlignmentFailure, EmptyTree, UnbalancedBrackets
from tracelens.syntax import (
    TreeNode,
    align_words_to_leaves,
    collect_productions,
    entropy_change_by_distance,
    group_distance_stats,
    is_preterminal_normal,
    linearize,
    parse_bracketed_tree,
    pct_change,
    production_entropy_table,
    production_table,
    sentence_distance_deltas,
    spearman,
    strip_preterminals,
    syntactic_distances,
)

PENN = "(S (NP (DT The) (NN dog)) (VP (VBZ barked)))"


def char_scan_distances(linearized: str) -> list[int]:
    """Literal paren counter between leaf tokens of a linearization."""
    tokens = linearized.split()
    leaf_idx = [
        i for i, t in enumerate(tokens) if not t.startswith("(") and t != ")"
    ]
    out = []
    for a, b in zip(leaf_idx, leaf_idx[1:]):
        between = " ".join(tokens[a + 1 : b])
        out.append(between.count("(") + between.count(")"))
    return out


def oracle_distances(tree: TreeNode, strip: bool = True) -> list[int]:
    work = strip_preterminals(tree) if strip else tree
    return char_scan_distances(linearize(work))


# ---------------------------------------------------------------------------
# parsing


def test_parse_penn_example():
    tree = parse_bracketed_tree(PENN)
    assert tree.label == "S"
    assert tree.leaves() == ["The", "dog", "barked"]


def test_parse_unbalanced():
    with pytest.raises(UnbalancedBrackets):
        parse_bracketed_tree("(S (NP")
    with pytest.raises(UnbalancedBrackets):
        parse_bracketed_tree("(S (NP x)))")


def test_parse_empty():
    with pytest.raises(EmptyTree):
        parse_bracketed_tree("   ")
    with pytest.raises(EmptyTree):
        parse_bracketed_tree("()")


def test_parse_escaped_brackets():
    tree = parse_bracketed_tree("(NP (-LRB- -LRB-) (NN x) (-RRB- -RRB-))")
    assert tree.leaves() == ["(", "x", ")"]
    # linearization re-escapes so paren counting stays sound
    assert "-LRB-" in linearize(tree)


def test_parse_round_trip():
    tree = parse_bracketed_tree(PENN)
    assert linearize(parse_bracketed_tree(linearize(tree))) == linearize(tree)


# ---------------------------------------------------------------------------
# stripping and distances


def test_strip_preterminal_normal_tree():
    stripped = strip_preterminals(parse_bracketed_tree(PENN))
    assert linearize(stripped) == "(S (NP The dog ) (VP barked ) )"


def test_strip_leaves_free_form_tree_alone():
    tree = parse_bracketed_tree("(A a (B b (C c)))")
    assert not is_preterminal_normal(tree)
    assert linearize(strip_preterminals(tree)) == linearize(tree)


def test_distances_penn_example():
    assert syntactic_distances(parse_bracketed_tree(PENN)) == [0, 2]


def test_distances_flat():
    assert syntactic_distances(parse_bracketed_tree("(X a b c)")) == [0, 0]


def test_distances_right_branching():
    assert syntactic_distances(parse_bracketed_tree("(A a (B b (C c)))")) == [1, 1]


def test_distances_raw_mode_keeps_pos_layer():
    assert syntactic_distances(parse_bracketed_tree(PENN), strip=False) == [2, 4]


def test_distance_zero_iff_same_parent_after_strip():
    tree = parse_bracketed_tree(PENN)
    stripped = strip_preterminals(tree)
    distances = syntactic_distances(tree)
    # "The dog" share NP -> 0; "dog barked" cross constituents -> nonzero
    assert distances[0] == 0 and distances[1] > 0
    assert stripped.children[0].leaves() == ["The", "dog"]


def random_tree(rng, max_depth=8, max_leaves=30) -> TreeNode:
    normal = bool(rng.integers(0, 2))
    n = int(rng.integers(1, max_leaves + 1))
    words = [f"w{i}" for i in range(n)]
    return TreeNode("S", _random_children(words, 1, rng, normal, max_depth))


def _random_children(words, depth, rng, normal, max_depth):
    labels = ("NP", "VP", "PP", "ADJP", "X", "NN", "DT")
    out = []
    if depth >= max_depth - 1 or len(words) <= 2:
        for w in words:
            out.append(_terminal(w, rng, normal, labels))
        return out
    k = int(rng.integers(2, min(4, len(words)) + 1))
    cuts = sorted(rng.choice(np.arange(1, len(words)), size=k - 1, replace=False).tolist())
    bounds = [0, *cuts, len(words)]
    for a, b in zip(bounds, bounds[1:]):
        part = words[a:b]
        if len(part) == 1:
            out.append(_terminal(part[0], rng, normal, labels))
        elif rng.random() < 0.8:
            label = labels[int(rng.integers(0, len(labels)))]
            out.append(
                TreeNode(label, _random_children(part, depth + 1, rng, normal, max_depth))
            )
        else:
            out.extend(_random_children(part, depth + 1, rng, normal, max_depth))
    return out


def _terminal(word, rng, normal, labels):
    if normal or rng.random() < 0.4:
        return TreeNode(labels[int(rng.integers(0, len(labels)))], [word])
    return word


@pytest.mark.parametrize("strip", [True, False])
def test_distances_match_char_scan_oracle(strip):
    rng = np.random.default_rng(11)
    for _ in range(200):
        tree = random_tree(rng)
        assert syntactic_distances(tree, strip=strip) == oracle_distances(tree, strip)


def count_internal(node):
    return 1 + sum(
        count_internal(c) for c in node.children if isinstance(c, TreeNode)
    )


def test_paren_balance_equals_internal_node_count():
    rng = np.random.default_rng(4)
    for _ in range(50):
        tree = random_tree(rng)
        stripped = strip_preterminals(tree)
        text = linearize(stripped)
        assert text.count("(") == text.count(")") == count_internal(stripped)


# ---------------------------------------------------------------------------
# entropy change


def test_pct_change_examples():
    assert pct_change(2.0, 1.0) == -50.0
    assert pct_change(0.0, 1.0) == 1e4  # 1e8 capped
    assert pct_change(1.0, 0.0) == -100.0


def test_group_medians():
    stats = group_distance_stats({0: [-10.0, -20.0], 2: [30.0]})
    groups = {g.distance: g for g in stats.groups}
    assert groups[0].median_pct == -15.0
    assert groups[2].median_pct == 30.0
    assert stats.boundaries == 3


def test_sentence_deltas_simple():
    tree = parse_bracketed_tree("(S (NP (DT a) (NN b)) (VP (VB c)))")
    records = sentence_distance_deltas(tree, ["a", "b", "c"], [2.0, 1.0, 1.5])
    assert [r.distance for r in records] == [0, 2]
    assert records[0].entropy_change_pct == -50.0
    assert records[1].entropy_change_pct == 50.0


def test_sentence_deltas_multi_leaf_word():
    # parser split "state-run" into three leaves; boundary uses the last leaf
    tree = parse_bracketed_tree(
        "(S (NP (JJ state) (HYPH -) (VBN run)) (NN mill))"
    )
    records = sentence_distance_deltas(tree, ["state-run", "mill"], [1.0, 2.0])
    assert len(records) == 1
    assert records[0].distance == oracle_distances(tree)[-1]


def test_alignment_failure():
    tree = parse_bracketed_tree("(S (X a) (X b))")
    with pytest.raises(AlignmentFailure):
        align_words_to_leaves(["a", "c"], tree.leaves())
    with pytest.raises(AlignmentFailure):
        align_words_to_leaves(["a"], tree.leaves())


def test_entropy_change_by_distance_skips_bad_sentences():
    good = parse_bracketed_tree("(S (X a) (X b))")
    stats = entropy_change_by_distance(
        [
            (good, ["a", "b"], [1.0, 2.0]),
            (good, ["a", "zzz"], [1.0, 2.0]),  # unalignable
        ]
    )
    assert stats.skipped_sentences == 1
    assert stats.boundaries == 1


def test_spearman_values():
    assert spearman([1, 2, 3, 4], [10, 20, 30, 40]) == pytest.approx(1.0)
    assert spearman([1, 2, 3, 4], [9, 7, 5, 3]) == pytest.approx(-1.0)
    assert spearman([1, 1, 1], [1, 2, 3]) is None
    assert spearman([1], [1]) is None
    # ties averaged: hand-checked value
    assert spearman([1, 2, 2, 3], [1, 3, 2, 4]) == pytest.approx(0.9486832980505139)


# ---------------------------------------------------------------------------
# productions


def test_production_cardinal_span_example():
    tree = parse_bracketed_tree("(NP (CD 16) (NN felony) (NNS counts))")
    rules = collect_productions(tree, [0.07, 0.05, 0.01])
    assert rules == [("NP -> CD NN NNS", (0.07, 0.05, 0.01))]


def test_production_bare_leaf_children():
    tree = parse_bracketed_tree("(X a b)")
    rules = collect_productions(tree, [1.0, 3.0])
    assert rules == [("X -> a b", (1.0, 3.0))]
    table = production_table({"X -> a b": [(1.0, 3.0)]})
    assert table[0].mean_entropy == 2.0
    assert table[0].child_means == (1.0, 3.0)
    assert table[0].count == 1


def test_production_repeat_occurrences():
    table = production_table({"X -> a b": [(1.0, 3.0), (1.0, 3.0)]})
    assert table[0].count == 2
    assert table[0].mean_entropy == 2.0


def test_production_nested_spans_use_word_means():
    tree = parse_bracketed_tree("(S (NP (DT a) (NN b)) (VP (VB c)))")
    rules = dict(collect_productions(tree, [1.0, 3.0, 5.0]))
    assert rules["S -> NP VP"] == (2.0, 5.0)
    assert rules["NP -> DT NN"] == (1.0, 3.0)


def test_production_table_sorted_and_thresholded():
    occurrences = {
        "A -> x y": [(5.0, 5.0)] * 6,
        "B -> x y": [(1.0, 1.0)] * 6,
        "C -> x y": [(9.0, 9.0)] * 2,
    }
    table = production_entropy_table(
        _as_sentences(occurrences), min_count=5
    )
    assert [s.rule for s in table] == ["A -> x y", "B -> x y"]


def _as_sentences(occurrences):
    for rule, occs in occurrences.items():
        parent, kids = rule.split(" -> ")
        for child_vals in occs:
            words = kids.split()
            tree = TreeNode(parent, list(words))
            yield tree, words, list(child_vals)


def test_production_table_permutation_invariant():
    items = list(
        _as_sentences({"A -> x y": [(1.0, 2.0), (3.0, 4.0)], "B -> x y": [(5.0, 6.0)]})
    )
    a = production_entropy_table(items)
    b = production_entropy_table(reversed(items))
    assert a == b
