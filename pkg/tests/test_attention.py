"""Row normalization, blocking, attention entropy and vocabulary projection."""

import math

import numpy as np
import pytest

from tracelens.attention import (
    AggregateAttention,
    BlockSet,
    attention_entropies,
    attention_entropy,
    attention_vs_prediction,
    bucket_means,
    compute_block_set,
    default_q,
    doc_attention,
    entropy_buckets,
    normalize_rows,
    projection_targets,
    vocabulary_projections,
)
from tracelens.errors import AllBlockedMass, ZeroRow

from conftest import make_doc, make_step


def block_of(positions, L):
    return BlockSet(
        blocked=tuple(positions), scores=np.zeros(L, dtype=np.int64), q=0.1, fraction=0.05
    )


# ---------------------------------------------------------------------------
# normalize_rows


def test_normalize_simple_row():
    att = normalize_rows(AggregateAttention(np.array([[2.0, 2.0]])))
    assert att.matrix.tolist() == [[0.5, 0.5]]
    assert att.normalized


def test_normalize_idempotent():
    att = normalize_rows(AggregateAttention(np.array([[0.3, 0.7]])))
    again = normalize_rows(att)
    assert again is att


def test_normalize_zero_row():
    with pytest.raises(ZeroRow) as err:
        normalize_rows(AggregateAttention(np.array([[0.2, 0.8], [0.0, 0.0]])))
    assert err.value.row_index == 1


# ---------------------------------------------------------------------------
# compute_block_set


def test_block_set_hand_example():
    rows = np.array(
        [
            [0.5, 0.3, 0.1, 0.05, 0.05],
            [0.6, 0.35, 0.05, 0.0, 0.0],
            [0.4, 0.3, 0.2, 0.05, 0.05],
            [0.7, 0.3, 0.0, 0.0, 0.0],
        ]
    )
    att = AggregateAttention(rows, normalized=True)
    block = compute_block_set(att, q=0.3, fraction=0.05)
    assert block.scores.tolist() == [4, 4, 0, 0, 0]
    assert block.blocked == (0,)  # tie on count, column 0 has more mass


def test_block_set_boundary_all_but_one():
    rows = np.full((3, 4), 0.25)
    att = AggregateAttention(rows, normalized=True)
    block = compute_block_set(att, q=0.5, fraction=0.75)
    assert len(block.blocked) == 3  # ceil(0.75 * 4)


def test_block_set_q_above_everything_falls_back_to_mass():
    rows = np.array([[0.7, 0.2, 0.1], [0.6, 0.3, 0.1]])
    att = AggregateAttention(rows, normalized=True)
    block = compute_block_set(att, q=5.0, fraction=0.4)
    assert block.scores.tolist() == [0, 0, 0]
    # ceil(0.4 * 3) = 2 blocked, picked by descending column mass
    assert block.blocked == (0, 1)


def test_block_set_exact_count_and_determinism():
    rng = np.random.default_rng(0)
    for _ in range(50):
        T = int(rng.integers(1, 12))
        L = int(rng.integers(2, 40))
        raw = rng.random((T, L)) + 1e-9
        att = normalize_rows(AggregateAttention(raw))
        a = compute_block_set(att, default_q(L), 0.05)
        b = compute_block_set(att, default_q(L), 0.05)
        assert a.blocked == b.blocked
        assert len(a.blocked) == math.ceil(0.05 * L - 1e-9)


def test_block_set_integer_product_not_rounded_up():
    rows = np.full((2, 120), 1.0 / 120)
    att = AggregateAttention(rows, normalized=True)
    block = compute_block_set(att, q=0.5, fraction=0.05)
    assert len(block.blocked) == 6  # 0.05*120 == 6 exactly, not 7


# ---------------------------------------------------------------------------
# attention_entropy


def test_attention_entropy_uniform_four():
    assert attention_entropy([0.25, 0.25, 0.25, 0.25]) == pytest.approx(
        math.log(4), abs=1e-12
    )


def test_attention_entropy_one_hot():
    assert attention_entropy([0.0, 1.0, 0.0]) == 0.0


def test_attention_entropy_blocked_one_hot():
    assert attention_entropy([0.5, 0.5], block_of([0], 2)) == 0.0


def test_attention_entropy_all_blocked():
    with pytest.raises(AllBlockedMass):
        attention_entropy([1.0, 0.0], block_of([0], 2))


def test_attention_entropies_batch_matches_reference():
    rng = np.random.default_rng(1)
    raw = rng.random((20, 15)) + 1e-9
    att = normalize_rows(AggregateAttention(raw))
    block = compute_block_set(att, default_q(15), 0.1)
    batch = attention_entropies(att, block)
    for i in range(20):
        assert batch[i] == pytest.approx(
            attention_entropy(att.matrix[i], block), abs=1e-10
        )
    bound = math.log(15 - len(block.blocked))
    assert np.all(batch <= bound + 1e-9)


# ---------------------------------------------------------------------------
# vocabulary projection


def projection_doc():
    # source ids [7, 9, 7, 4]; one step emitting id 7 with row [.4,.1,.3,.2]
    return make_doc(
        [("w7", True)],
        source_pieces=("a", "b", "c", "d"),
        source_ids=[7, 9, 7, 4],
        step_builder=lambda i, L, piece, begins: make_step(
            i, L, piece=piece, begins=begins, token_id=7, row=[0.4, 0.1, 0.3, 0.2]
        ),
    )


def test_projection_sums_matching_positions():
    doc = projection_doc()
    att = normalize_rows(doc_attention(doc))
    proj = vocabulary_projections(doc, att)
    offsets = projection_targets(doc)
    # offset 0 is column index 2 in (-2, -1, 0, +1)
    assert offsets[0].tolist() == [-1, -1, 7, -1]
    assert proj[0, 2] == pytest.approx(0.7, abs=1e-12)
    assert math.isnan(proj[0, 3])  # no next step


def test_projection_absent_target_is_zero():
    doc = make_doc(
        [("x", True), ("y", True)],
        source_pieces=("a", "b"),
        source_ids=[1, 2],
        step_builder=lambda i, L, piece, begins: make_step(
            i, L, piece=piece, begins=begins, token_id=100 + i, row=[0.5, 0.5]
        ),
    )
    att = normalize_rows(doc_attention(doc))
    proj = vocabulary_projections(doc, att)
    assert proj[0, 2] == 0.0  # id 100 not in source
    assert proj[0, 3] == 0.0  # next step id 101 not in source


def test_projection_distinct_ids_sum_to_unblocked_mass():
    # projecting every distinct source id and summing recovers exactly 1,
    # i.e. the blocked-renormalized row mass, through the kernel route
    from tracelens import kernels

    rng = np.random.default_rng(2)
    ids = rng.integers(0, 6, size=12).astype(np.int64)
    row = rng.random((1, 12))
    row /= row.sum()
    keep = np.ones(12, dtype=bool)
    keep[[3, 8]] = False
    distinct = np.unique(ids)
    targets = np.tile(distinct, (1, 1))
    proj = kernels.vocab_projection_batch(row, keep, ids, targets)
    assert np.all((proj >= 0.0) & (proj <= 1.0))
    assert proj.sum() == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# bucketed curves


def test_attention_vs_prediction_planted_coupling():
    # attention entropy = 0.5 * prediction entropy, planted per step: a flat
    # nucleus of k tokens against flat attention on sqrt(k) positions, plus a
    # hub column that soaks up the one blocked slot.
    docs = []
    supports = [4, 16, 64, 256]
    for k in supports:
        width = int(round(math.sqrt(k)))
        row = np.zeros(64)
        row[63] = 0.6  # hub: attended above q by every step, gets blocked
        row[:width] = 0.4 / width
        docs.append(
            make_doc(
                [("x", True)],
                source_pieces=tuple(f"s{i}" for i in range(64)),
                source_ids=list(range(64)),
                step_builder=lambda i, L, piece, begins, k=k, row=row: make_step(
                    i,
                    L,
                    piece=piece,
                    begins=begins,
                    topk=tuple((j, 0.95 / k) for j in range(k)),
                    row=row,
                ),
            )
        )
    curve = attention_vs_prediction(docs, bucket_width=0.25, q=0.5, fraction=0.01)
    assert len(curve.buckets) == len(supports)
    assert all(a < b for a, b in zip(curve.means, curve.means[1:]))
    for mean, k in zip(curve.means, supports):
        assert mean == pytest.approx(0.5 * math.log(k), abs=1e-9)


def test_bucket_means_single_bucket():
    buckets = np.array([3, 3, 3])
    values = np.array([1.0, 2.0, 3.0])
    curve = bucket_means(buckets, values, 0.25)
    assert curve.buckets.tolist() == [3]
    assert curve.means.tolist() == [2.0]
    assert curve.counts.tolist() == [3]


def test_entropy_buckets_width():
    pred = np.array([0.0, 0.24, 0.25, 1.3])
    assert entropy_buckets(pred, 0.25).tolist() == [0, 0, 1, 5]
