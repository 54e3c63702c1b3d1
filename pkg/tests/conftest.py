"""Shared builders for hand-constructed trace documents."""

import numpy as np
import pytest

from tracelens.trace import SourceToken, StepRecord, TraceDocument


def make_source(pieces, ids=None, begins=None):
    ids = ids if ids is not None else list(range(1000, 1000 + len(pieces)))
    begins = begins if begins is not None else [True] * len(pieces)
    return tuple(
        SourceToken(position=i, token_id=ids[i], piece=pieces[i], begins_word=begins[i])
        for i in range(len(pieces))
    )


def make_step(
    index,
    source_len,
    piece="w",
    begins=True,
    token_id=0,
    topk=((0, 0.995),),
    tail=None,
    row=None,
):
    topk = tuple((int(t), float(p)) for t, p in topk)
    if tail is None:
        tail = 1.0 - sum(p for _, p in topk)
    if row is None:
        row = np.full(source_len, 1.0 / source_len)
    return StepRecord(
        step_index=index,
        output_token_id=token_id,
        output_piece=piece,
        begins_word=begins,
        topk=topk,
        tail_mass=float(tail),
        attention_row=np.asarray(row, dtype=np.float64),
    )


def make_doc(
    pieces_and_flags,
    source_pieces=("the", "cat"),
    doc_id="doc-0",
    sentence_spans=None,
    parses=None,
    source_ids=None,
    step_builder=None,
):
    """Document with one step per (piece, begins_word) pair and uniform rows."""
    source = make_source(list(source_pieces), ids=source_ids)
    steps = []
    for i, (piece, begins) in enumerate(pieces_and_flags):
        if step_builder is not None:
            steps.append(step_builder(i, len(source), piece, begins))
        else:
            steps.append(make_step(i, len(source), piece=piece, begins=begins))
    return TraceDocument(
        doc_id=doc_id,
        source_tokens=source,
        steps=tuple(steps),
        sentence_spans=sentence_spans,
        parses=parses,
    )


@pytest.fixture(scope="session")
def synth_default_doc():
    from tracelens.synth import SynthConfig, generate_synthetic

    return generate_synthetic(SynthConfig(), 7)
