"""Trace data model: record parsing, validation, detokenization, segmentation.

A trace file is UTF-8 text, one JSON object per line. The first line is a
header ``{"trace_format_version": 1}``; every following line is one document
with fields ``doc_id``, ``source_tokens``, ``steps`` and the optional
``sentence_spans`` and ``parses``. Unknown fields are ignored.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Any, Iterable, Iterator

import numpy as np

from .errors import (
    EmptyTrace,
    FormatVersionMismatch,
    MalformedRecord,
    MissingInput,
    SchemaViolation,
)

TRACE_FORMAT_VERSION = 1

# Tolerance for the stored-mass window: sum(topk) + tail_mass must be 1 within this.
MASS_TOL = 1e-6
# Producers must store at least this much probability mass per step.
MIN_STORED_MASS = 0.99

SENTENCE_TERMINALS = (".", "!", "?")


@dataclass(frozen=True)
class SourceToken:
    position: int
    token_id: int
    piece: str
    begins_word: bool


@dataclass(frozen=True, eq=False)
class StepRecord:
    step_index: int
    output_token_id: int
    output_piece: str
    begins_word: bool
    topk: tuple[tuple[int, float], ...]
    tail_mass: float
    attention_row: np.ndarray

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StepRecord):
            return NotImplemented
        return (
            self.step_index == other.step_index
            and self.output_token_id == other.output_token_id
            and self.output_piece == other.output_piece
            and self.begins_word == other.begins_word
            and self.topk == other.topk
            and self.tail_mass == other.tail_mass
            and np.array_equal(self.attention_row, other.attention_row)
        )


@dataclass(frozen=True)
class TraceDocument:
    doc_id: str
    source_tokens: tuple[SourceToken, ...]
    steps: tuple[StepRecord, ...]
    sentence_spans: tuple[tuple[int, int], ...] | None = None
    parses: tuple[str, ...] | None = None

    @property
    def source_len(self) -> int:
        return len(self.source_tokens)

    @property
    def num_steps(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class Word:
    """One detokenized word with the generation steps that produced it."""

    text: str
    first_step: int
    step_span: tuple[int, int]


@dataclass(frozen=True)
class WordSequence:
    words: tuple[Word, ...]
    sentence_spans: tuple[tuple[int, int], ...] = ()


@dataclass(frozen=True)
class Violation:
    locator: str
    rule: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple[Violation, ...]


# ---------------------------------------------------------------------------
# Parsing / serialization


def _require(obj: dict, key: str, locator: str) -> Any:
    if key not in obj:
        raise SchemaViolation(f"{locator}: missing required field '{key}'")
    return obj[key]


def _as_int(value: Any, locator: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaViolation(f"{locator}: expected integer, got {value!r}")
    return value


def _as_float(value: Any, locator: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaViolation(f"{locator}: expected number, got {value!r}")
    return float(value)


def _as_bool(value: Any, locator: str) -> bool:
    if not isinstance(value, bool):
        raise SchemaViolation(f"{locator}: expected boolean, got {value!r}")
    return value


def _as_str(value: Any, locator: str) -> str:
    if not isinstance(value, str):
        raise SchemaViolation(f"{locator}: expected string, got {value!r}")
    return value


def _parse_source_token(obj: Any, locator: str) -> SourceToken:
    if not isinstance(obj, dict):
        raise SchemaViolation(f"{locator}: expected object")
    return SourceToken(
        position=_as_int(_require(obj, "position", locator), f"{locator}.position"),
        token_id=_as_int(_require(obj, "token_id", locator), f"{locator}.token_id"),
        piece=_as_str(_require(obj, "piece", locator), f"{locator}.piece"),
        begins_word=_as_bool(_require(obj, "begins_word", locator), f"{locator}.begins_word"),
    )


def _parse_step(obj: Any, locator: str, source_len: int) -> StepRecord:
    if not isinstance(obj, dict):
        raise SchemaViolation(f"{locator}: expected object")
    raw_topk = _require(obj, "topk", locator)
    if not isinstance(raw_topk, list) or not raw_topk:
        raise SchemaViolation(f"{locator}.topk: expected non-empty array")
    topk: list[tuple[int, float]] = []
    prev = math.inf
    for i, pair in enumerate(raw_topk):
        if not isinstance(pair, list) or len(pair) != 2:
            raise SchemaViolation(f"{locator}.topk[{i}]: expected [token_id, probability] pair")
        tok = _as_int(pair[0], f"{locator}.topk[{i}]")
        prob = _as_float(pair[1], f"{locator}.topk[{i}]")
        if prob <= 0.0:
            raise SchemaViolation(f"{locator}.topk[{i}]: probability must be positive")
        if prob > prev:
            raise SchemaViolation(f"{locator}.topk[{i}]: probabilities must be non-increasing")
        prev = prob
        topk.append((tok, prob))
    raw_row = _require(obj, "attention_row", locator)
    if not isinstance(raw_row, list):
        raise SchemaViolation(f"{locator}.attention_row: expected array")
    if len(raw_row) != source_len:
        raise SchemaViolation(
            f"{locator}.attention_row: length {len(raw_row)} != source length {source_len}"
        )
    row = np.asarray(
        [_as_float(v, f"{locator}.attention_row[{i}]") for i, v in enumerate(raw_row)],
        dtype=np.float64,
    )
    return StepRecord(
        step_index=_as_int(_require(obj, "step_index", locator), f"{locator}.step_index"),
        output_token_id=_as_int(
            _require(obj, "output_token_id", locator), f"{locator}.output_token_id"
        ),
        output_piece=_as_str(_require(obj, "output_piece", locator), f"{locator}.output_piece"),
        begins_word=_as_bool(_require(obj, "begins_word", locator), f"{locator}.begins_word"),
        topk=tuple(topk),
        tail_mass=_as_float(_require(obj, "tail_mass", locator), f"{locator}.tail_mass"),
        attention_row=row,
    )


def _parse_spans(raw: Any, locator: str) -> tuple[tuple[int, int], ...]:
    if not isinstance(raw, list):
        raise SchemaViolation(f"{locator}: expected array of [start, end] pairs")
    spans = []
    for i, pair in enumerate(raw):
        if not isinstance(pair, list) or len(pair) != 2:
            raise SchemaViolation(f"{locator}[{i}]: expected [start, end] pair")
        spans.append((_as_int(pair[0], f"{locator}[{i}]"), _as_int(pair[1], f"{locator}[{i}]")))
    return tuple(spans)


def parse_trace_line(line: str) -> TraceDocument:
    """Parse one document line of a trace file.

    Raises MalformedRecord for JSON syntax errors and SchemaViolation for
    structural problems (missing fields, wrong arity, mis-ordered topk).
    """
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise SchemaViolation("record must be a JSON object")
    doc_id = _as_str(_require(obj, "doc_id", "record"), "record.doc_id")
    raw_sources = _require(obj, "source_tokens", "record")
    if not isinstance(raw_sources, list):
        raise SchemaViolation("record.source_tokens: expected array")
    sources = tuple(
        _parse_source_token(tok, f"source_tokens[{i}]") for i, tok in enumerate(raw_sources)
    )
    raw_steps = _require(obj, "steps", "record")
    if not isinstance(raw_steps, list):
        raise SchemaViolation("record.steps: expected array")
    steps = tuple(
        _parse_step(s, f"steps[{i}]", len(sources)) for i, s in enumerate(raw_steps)
    )
    spans = None
    if obj.get("sentence_spans") is not None:
        spans = _parse_spans(obj["sentence_spans"], "sentence_spans")
    parses = None
    if obj.get("parses") is not None:
        raw_parses = obj["parses"]
        if not isinstance(raw_parses, list):
            raise SchemaViolation("record.parses: expected array of strings")
        parses = tuple(_as_str(p, f"parses[{i}]") for i, p in enumerate(raw_parses))
    return TraceDocument(
        doc_id=doc_id,
        source_tokens=sources,
        steps=steps,
        sentence_spans=spans,
        parses=parses,
    )


def serialize_document(doc: TraceDocument) -> str:
    """Serialize a document to one canonical trace-file line."""
    obj: dict[str, Any] = {
        "doc_id": doc.doc_id,
        "source_tokens": [
            {
                "position": t.position,
                "token_id": t.token_id,
                "piece": t.piece,
                "begins_word": t.begins_word,
            }
            for t in doc.source_tokens
        ],
        "steps": [
            {
                "step_index": s.step_index,
                "output_token_id": s.output_token_id,
                "output_piece": s.output_piece,
                "begins_word": s.begins_word,
                "topk": [[tok, prob] for tok, prob in s.topk],
                "tail_mass": s.tail_mass,
                "attention_row": s.attention_row.tolist(),
            }
            for s in doc.steps
        ],
    }
    if doc.sentence_spans is not None:
        obj["sentence_spans"] = [[a, b] for a, b in doc.sentence_spans]
    if doc.parses is not None:
        obj["parses"] = list(doc.parses)
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def serialize_header() -> str:
    return json.dumps({"trace_format_version": TRACE_FORMAT_VERSION}, separators=(",", ":"))


# ---------------------------------------------------------------------------
# Validation


def validate_document(doc: TraceDocument) -> ValidationReport:
    """Check every structural invariant of a document; pure, never raises."""
    violations: list[Violation] = []

    def bad(locator: str, rule: str, message: str) -> None:
        violations.append(Violation(locator, rule, message))

    for i, tok in enumerate(doc.source_tokens):
        if tok.position != i:
            bad(f"source_tokens[{i}]", "positions", f"position {tok.position}, expected {i}")
        if tok.token_id < 0:
            bad(f"source_tokens[{i}]", "token_id", "token_id must be non-negative")

    source_len = doc.source_len
    for i, step in enumerate(doc.steps):
        loc = f"steps[{i}]"
        if step.step_index != i:
            bad(loc, "step_index", f"step_index {step.step_index}, expected {i}")
        if len(step.attention_row) != source_len:
            bad(
                loc,
                "attention_length",
                f"attention_row length {len(step.attention_row)} != {source_len}",
            )
        if np.any(step.attention_row < 0):
            bad(loc, "attention_nonneg", "attention_row entries must be non-negative")
        probs = [p for _, p in step.topk]
        ids = [t for t, _ in step.topk]
        if any(p <= 0 or p > 1 for p in probs):
            bad(loc, "topk_positive", "topk probabilities must lie in (0, 1]")
        if any(b > a for a, b in zip(probs, probs[1:])):
            bad(loc, "topk_order", "topk probabilities must be non-increasing")
        if len(set(ids)) != len(ids):
            bad(loc, "topk_distinct", "topk token ids must be distinct")
        stored = math.fsum(probs)
        if not 0.0 <= step.tail_mass < 1.0:
            bad(loc, "tail_mass", f"tail_mass {step.tail_mass} outside [0, 1)")
        if abs(stored + step.tail_mass - 1.0) > MASS_TOL:
            bad(loc, "mass", f"stored mass {stored} + tail {step.tail_mass} != 1")
        if stored < MIN_STORED_MASS:
            bad(loc, "stored_mass", f"stored mass {stored} < {MIN_STORED_MASS}")

    if doc.sentence_spans is not None:
        expected_start = 0
        for i, (a, b) in enumerate(doc.sentence_spans):
            if a != expected_start or b <= a:
                bad(
                    "sentence_spans",
                    "spans",
                    f"span {i} = [{a}, {b}) does not continue partition at {expected_start}",
                )
                break
            expected_start = b
        else:
            if expected_start != doc.num_steps:
                bad(
                    "sentence_spans",
                    "spans",
                    f"spans cover [0, {expected_start}) but document has {doc.num_steps} steps",
                )

    if doc.parses is not None:
        n_sents = _sentence_count(doc)
        if n_sents is not None and len(doc.parses) != n_sents:
            bad("parses", "parses", f"{len(doc.parses)} parses for {n_sents} sentences")

    return ValidationReport(ok=not violations, violations=tuple(violations))


def _sentence_count(doc: TraceDocument) -> int | None:
    if doc.sentence_spans is not None:
        return len(doc.sentence_spans)
    if not doc.steps:
        return None
    try:
        words = segment_sentences(detokenize(doc), doc)
    except EmptyTrace:
        return None
    return len(words.sentence_spans)


# ---------------------------------------------------------------------------
# Detokenization / sentence segmentation


def detokenize(doc: TraceDocument) -> WordSequence:
    """Group decoding steps into words using the producer's begins_word flags.

    Word text is the piece concatenation with boundary whitespace stripped.
    A first step flagged as a continuation is repaired to a word start.
    """
    if not doc.steps:
        raise EmptyTrace(f"document {doc.doc_id!r} has no steps")
    return WordSequence(words=_group_words(
        [(s.output_piece, s.begins_word) for s in doc.steps]
    ))


def _group_words(pieces: list[tuple[str, bool]]) -> tuple[Word, ...]:
    starts = [i for i, (_, begins) in enumerate(pieces) if begins or i == 0]
    ends = starts[1:] + [len(pieces)]
    words = []
    for a, b in zip(starts, ends):
        text = "".join(piece for piece, _ in pieces[a:b]).strip()
        words.append(Word(text=text, first_step=a, step_span=(a, b)))
    return tuple(words)


def source_words(doc: TraceDocument) -> list[str]:
    """Detokenize the source tokens with the same grouping rule as the summary."""
    if not doc.source_tokens:
        return []
    grouped = _group_words([(t.piece, t.begins_word) for t in doc.source_tokens])
    return [w.text for w in grouped]


def segment_sentences(wordseq: WordSequence, doc: TraceDocument) -> WordSequence:
    """Attach sentence spans (word-index intervals) to a word sequence.

    Producer-supplied step spans take precedence; otherwise sentences end
    after any word whose text ends with '.', '!' or '?', keeping a trailing
    partial sentence.
    """
    words = wordseq.words
    if not words:
        return WordSequence(words=words, sentence_spans=())
    if doc.sentence_spans is not None:
        spans: list[tuple[int, int]] = []
        w = 0
        for a, b in doc.sentence_spans:
            start = w
            while w < len(words) and a <= words[w].first_step < b:
                w += 1
            spans.append((start, w))
        if w != len(words):
            spans.append((w, len(words)))
        return WordSequence(words=words, sentence_spans=tuple(spans))
    spans = []
    start = 0
    for i, word in enumerate(words):
        if word.text.endswith(SENTENCE_TERMINALS):
            spans.append((start, i + 1))
            start = i + 1
    if start < len(words):
        spans.append((start, len(words)))
    return WordSequence(words=words, sentence_spans=tuple(spans))


# ---------------------------------------------------------------------------
# File IO


def open_trace(path: str) -> Iterator[str]:
    """Yield the document lines of a trace file after checking the header."""
    if not os.path.exists(path):
        raise MissingInput(f"trace file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.strip():
            raise MalformedRecord(f"{path}: empty file, expected a header line")
        try:
            meta = json.loads(header)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"{path}: header is not valid JSON") from exc
        if not isinstance(meta, dict) or "trace_format_version" not in meta:
            raise MalformedRecord(f"{path}: first line is not a trace header")
        if meta["trace_format_version"] != TRACE_FORMAT_VERSION:
            raise FormatVersionMismatch(
                f"{path}: format version {meta['trace_format_version']}, "
                f"expected {TRACE_FORMAT_VERSION}"
            )
        for line in fh:
            if line.strip():
                yield line


def read_trace_file(path: str) -> Iterator[TraceDocument]:
    """Parse every document in a trace file, raising on the first bad record."""
    for line in open_trace(path):
        yield parse_trace_line(line)


def write_trace_file(path: str, docs: Iterable[TraceDocument]) -> int:
    """Write a header plus one line per document; returns the document count."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_header() + "\n")
        for doc in docs:
            fh.write(serialize_document(doc) + "\n")
            count += 1
    return count
