"""Nucleus truncation and entropy: frozen examples and brute-force oracles."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tracelens.entropy import (
    entropy,
    nucleus_entropy,
    nucleus_truncate,
    prediction_entropies,
)
from tracelens.errors import InsufficientMass, NotNormalized
from tracelens.synth import SynthConfig, generate_synthetic

from conftest import make_doc, make_step


def brute_force_nucleus_size(probs, p):
    """Smallest descending prefix whose exact mass reaches p (with the same
    boundary slack the implementation documents)."""
    target = min(p, math.fsum(probs))
    for k in range(1, len(probs) + 1):
        if math.fsum(probs[:k]) >= target - 1e-9:
            return k
    return len(probs)


def test_truncate_hand_example():
    dist = nucleus_truncate([(0, 0.90), (1, 0.05), (2, 0.03), (3, 0.02)], 0.95)
    assert dist.nucleus_size == 2
    assert dist.nucleus_mass == pytest.approx(0.95, abs=1e-12)
    assert dist.entries[0][1] == pytest.approx(0.947368, abs=1e-6)
    assert dist.entries[1][1] == pytest.approx(0.052632, abs=1e-6)


def test_truncate_one_hot():
    dist = nucleus_truncate([(7, 1.0)], 0.5)
    assert dist.entries == ((7, 1.0),)
    assert dist.nucleus_size == 1


def test_truncate_uniform_10000():
    dist = nucleus_truncate([(i, 1e-4) for i in range(10_000)], 0.95)
    assert dist.nucleus_size == 9_500


def test_truncate_insufficient_mass():
    with pytest.raises(InsufficientMass):
        nucleus_truncate([(0, 0.5), (1, 0.3)], 0.95)


def test_truncate_tie_break_by_token_id():
    # two equal probabilities at the nucleus boundary: lower id is kept
    dist = nucleus_truncate([(9, 0.6), (4, 0.2), (2, 0.2)], 0.8)
    kept_ids = [t for t, _ in dist.entries]
    assert kept_ids == [9, 2]


def test_entropy_uniform_constants():
    assert entropy([1e-4] * 10_000) == pytest.approx(9.2103, abs=1e-3)
    assert entropy([1e-5] * 100_000) == pytest.approx(11.5129, abs=1e-3)


def test_entropy_one_hot_is_zero():
    value = entropy([1.0, 0.0, 0.0])
    assert value == 0.0
    assert math.copysign(1.0, value) > 0  # never -0.0


def test_entropy_hand_example():
    assert entropy([0.947368, 0.052632]) == pytest.approx(0.2062, abs=1e-4)


def test_entropy_rejects_unnormalized():
    with pytest.raises(NotNormalized):
        entropy([0.5, 0.1])
    with pytest.raises(NotNormalized):
        entropy([1.2, -0.2])


def test_entropy_permutation_invariant():
    rng = np.random.default_rng(0)
    probs = rng.dirichlet(np.ones(50))
    assert entropy(probs) == pytest.approx(entropy(probs[::-1].copy()), abs=1e-12)


@settings(max_examples=150, deadline=None)
@given(
    st.lists(st.floats(min_value=1e-6, max_value=1.0), min_size=2, max_size=60),
    st.floats(min_value=0.5, max_value=1.0),
)
def test_truncate_properties(raw, p):
    weights = np.asarray(raw)
    probs = np.sort(weights / weights.sum())[::-1]
    topk = [(i, float(q)) for i, q in enumerate(probs)]
    dist = nucleus_truncate(topk, p)
    renormalized = [q for _, q in dist.entries]
    # sums to one, minimal prefix, nothing outside the nucleus
    assert math.fsum(renormalized) == pytest.approx(1.0, abs=1e-9)
    assert dist.nucleus_size == brute_force_nucleus_size(list(probs), p)
    assert len(dist.entries) == dist.nucleus_size
    assert all(q > 0 for q in renormalized)


def test_truncate_full_mass_is_plain_entropy():
    # p = 1.0 keeps everything; renormalizing by the total is a no-op
    rng = np.random.default_rng(3)
    probs = np.sort(rng.dirichlet(np.ones(20)))[::-1]
    topk = [(i, float(q)) for i, q in enumerate(probs)]
    assert nucleus_entropy(topk, 1.0) == pytest.approx(entropy(probs), abs=1e-9)


def test_entropy_bounded_by_log_support():
    rng = np.random.default_rng(5)
    for _ in range(50):
        n = int(rng.integers(2, 200))
        probs = rng.dirichlet(np.ones(n))
        h = entropy(probs)
        assert -1e-12 <= h <= math.log(n) + 1e-12


# ---------------------------------------------------------------------------
# prediction_entropies


def test_prediction_entropies_one_hot_steps():
    doc = make_doc([("a", True), ("b", True), ("c", True)])
    values = prediction_entropies(doc, 0.95)
    assert values.tolist() == [0.0, 0.0, 0.0]


def test_prediction_entropies_single_step_example():
    doc = make_doc(
        [("a", True)],
        step_builder=lambda i, L, piece, begins: make_step(
            i,
            L,
            piece=piece,
            begins=begins,
            topk=((0, 0.90), (1, 0.05), (2, 0.03), (3, 0.02)),
        ),
    )
    values = prediction_entropies(doc, 0.95)
    assert values[0] == pytest.approx(0.2062, abs=1e-4)


def test_prediction_entropies_matches_composed_route(synth_default_doc):
    batch = prediction_entropies(synth_default_doc, 0.95)
    for i, step in enumerate(synth_default_doc.steps):
        assert batch[i] == pytest.approx(nucleus_entropy(step.topk, 0.95), abs=1e-12)


def test_prediction_entropies_reports_offending_step():
    doc = make_doc(
        [("a", True), ("b", True)],
        step_builder=lambda i, L, piece, begins: make_step(
            i,
            L,
            piece=piece,
            begins=begins,
            topk=((0, 0.992),) if i == 0 else ((0, 0.991),),
            tail=0.008 if i == 0 else 0.009,
        ),
    )
    with pytest.raises(InsufficientMass) as err:
        prediction_entropies(doc, 0.9925)
    assert err.value.step_index == 0


def test_prediction_entropies_support_bound(synth_default_doc):
    values = prediction_entropies(synth_default_doc, 0.95)
    for i, step in enumerate(synth_default_doc.steps):
        size = nucleus_truncate(step.topk, 0.95).nucleus_size
        assert values[i] <= math.log(size) + 1e-9


def test_prediction_entropies_wider_nucleus_never_sharper():
    doc = generate_synthetic(SynthConfig(sentences=1), 0)
    wide = prediction_entropies(doc, 0.99)
    narrow = prediction_entropies(doc, 0.95)
    assert np.all(wide >= narrow - 1e-9)


def test_prediction_entropies_p_one_on_full_mass_steps():
    doc = make_doc(
        [("a", True)],
        step_builder=lambda i, L, piece, begins: make_step(
            i,
            L,
            piece=piece,
            begins=begins,
            topk=((0, 0.6), (1, 0.4)),
            tail=0.0,
        ),
    )
    value = prediction_entropies(doc, 1.0)[0]
    assert value == pytest.approx(entropy([0.6, 0.4]), abs=1e-12)
