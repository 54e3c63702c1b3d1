"""Synthetic generator: determinism, validity, and planted statistics."""

import numpy as np
import pytest

from tracelens.behavior import Label, classify_bigrams
from tracelens.entropy import prediction_entropies
from tracelens.errors import InvalidConfig
from tracelens.synth import SynthConfig, generate_synthetic, synth_corpus
from tracelens.trace import (
    detokenize,
    segment_sentences,
    serialize_document,
    source_words,
    validate_document,
)


def labels_for(doc):
    words = segment_sentences(detokenize(doc), doc)
    entropies = prediction_entropies(doc, 0.95)
    return classify_bigrams(words, source_words(doc), step_entropies=entropies)


def test_same_seed_byte_identical():
    cfg = SynthConfig()
    a = serialize_document(generate_synthetic(cfg, 42))
    b = serialize_document(generate_synthetic(cfg, 42))
    assert a == b


def test_different_seeds_differ():
    cfg = SynthConfig()
    assert serialize_document(generate_synthetic(cfg, 1)) != serialize_document(
        generate_synthetic(cfg, 2)
    )


def test_generated_documents_validate():
    for fraction in (0.0, 0.3, 0.5, 1.0):
        cfg = SynthConfig(sentences=3, copy_fraction=fraction)
        for seed in (0, 5):
            assert validate_document(generate_synthetic(cfg, seed)).ok


def test_full_copy_fraction_makes_every_bigram_existing():
    doc = generate_synthetic(SynthConfig(copy_fraction=1.0, sentences=4), 9)
    labels = labels_for(doc)
    assert labels[0].label is Label.UNDEFINED
    assert all(l.label is Label.EXISTING for l in labels[1:])


def test_zero_copy_fraction_makes_every_bigram_novel():
    doc = generate_synthetic(SynthConfig(copy_fraction=0.0, sentences=4), 9)
    labels = labels_for(doc)
    assert all(l.label is Label.NOVEL for l in labels[1:])


def test_copy_label_rate_at_ten_thousand_steps():
    # one large document: 1000 sentences x 10 words
    doc = generate_synthetic(SynthConfig(sentences=1000), 3)
    labels = labels_for(doc)
    existing = sum(1 for l in labels if l.label is Label.EXISTING)
    defined = sum(1 for l in labels if l.label is not Label.UNDEFINED)
    assert abs(existing / defined - 0.5) < 0.03


def test_invalid_fractions_rejected():
    with pytest.raises(InvalidConfig):
        generate_synthetic(SynthConfig(copy_fraction=1.5), 0)
    with pytest.raises(InvalidConfig):
        generate_synthetic(SynthConfig(copy_fraction=-0.1), 0)
    with pytest.raises(InvalidConfig):
        generate_synthetic(SynthConfig(source_len=20), 0)  # too small for steps


def test_corpus_seeds_and_ids_unique():
    docs = list(synth_corpus(SynthConfig(sentences=2), 100, 5))
    ids = [d.doc_id for d in docs]
    assert len(set(ids)) == 5


def test_planted_entropy_separation():
    doc = generate_synthetic(SynthConfig(), 11)
    labels = labels_for(doc)
    existing = [l.entropy for l in labels if l.label is Label.EXISTING]
    novel = [l.entropy for l in labels if l.label is Label.NOVEL]
    assert np.median(existing) < np.median(novel)


def test_parses_align_with_sentences():
    from tracelens.syntax import parse_bracketed_tree

    doc = generate_synthetic(SynthConfig(sentences=4), 2)
    words = segment_sentences(detokenize(doc), doc)
    assert len(doc.parses) == len(words.sentence_spans)
    for (a, b), parse in zip(words.sentence_spans, doc.parses):
        tree = parse_bracketed_tree(parse)
        assert tree.leaves() == [w.text for w in words.words[a:b]]
