"""Corpus-level analysis pipeline and report bundles.

A bundle is a directory of RFC-4180 CSV tables plus manifest.json and
summary.json. Raw per-value sidecars (sorted, JSON) ride along under
sidecars/ so that shard bundles merge into results byte-identical to a
single-pass run: every statistic is recomputed from the sorted value
multiset, which is invariant to how the corpus was split.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from . import attention as attn
from . import behavior, syntax
from .entropy import prediction_entropies
from .errors import (
    ConfigMismatch,
    InvalidConfig,
    MissingInput,
    TracelensError,
)
from .trace import (
    TRACE_FORMAT_VERSION,
    TraceDocument,
    detokenize,
    open_trace,
    parse_trace_line,
    segment_sentences,
    source_words,
    validate_document,
)

logger = logging.getLogger("tracelens.report")

ALL_ANALYSES = ("copy", "position", "syntax", "attention")


@dataclass(frozen=True)
class RunConfig:
    nucleus_p: float = 0.95
    bin_width: float = 0.25
    truncate_at: float = 5.0
    q: float | None = None
    block_fraction: float = 0.05
    bucket_width: float = 0.25
    case_fold: bool = False
    strip_preterminals: bool = True
    min_rule_count: int = 5
    analyses: tuple[str, ...] = ALL_ANALYSES
    inputs: tuple[str, ...] = ()
    parse_sidecar: str | None = None
    out_dir: str = ""

    def validate(self) -> None:
        for name, value in (
            ("nucleus_p", self.nucleus_p),
            ("block_fraction", self.block_fraction),
        ):
            if not 0.0 < value < 1.0:
                raise InvalidConfig(f"{name} {value} outside (0, 1)")
        for name, value in (
            ("bin_width", self.bin_width),
            ("truncate_at", self.truncate_at),
            ("bucket_width", self.bucket_width),
        ):
            if value <= 0.0:
                raise InvalidConfig(f"{name} must be positive, got {value}")
        if self.q is not None and self.q <= 0.0:
            raise InvalidConfig(f"q must be positive, got {self.q}")
        if self.min_rule_count < 1:
            raise InvalidConfig("min_rule_count must be >= 1")
        unknown = set(self.analyses) - set(ALL_ANALYSES)
        if unknown:
            raise InvalidConfig(f"unknown analyses: {sorted(unknown)}")

    def echo(self) -> dict:
        """Analysis parameters identifying a run for merge compatibility;
        input and output paths intentionally excluded."""
        return {
            "nucleus_p": self.nucleus_p,
            "bin_width": self.bin_width,
            "truncate_at": self.truncate_at,
            "q": self.q,
            "block_fraction": self.block_fraction,
            "bucket_width": self.bucket_width,
            "case_fold": self.case_fold,
            "strip_preterminals": self.strip_preterminals,
            "min_rule_count": self.min_rule_count,
            "analyses": list(self.analyses),
        }

    @staticmethod
    def from_echo(echo: dict) -> "RunConfig":
        return RunConfig(
            nucleus_p=echo["nucleus_p"],
            bin_width=echo["bin_width"],
            truncate_at=echo["truncate_at"],
            q=echo["q"],
            block_fraction=echo["block_fraction"],
            bucket_width=echo["bucket_width"],
            case_fold=echo["case_fold"],
            strip_preterminals=echo["strip_preterminals"],
            min_rule_count=echo["min_rule_count"],
            analyses=tuple(echo["analyses"]),
        )


@dataclass
class CorpusState:
    """Raw per-value accumulators; everything else derives from these."""

    copy_values: dict[str, list[float]] = field(
        default_factory=lambda: {"existing": [], "novel": []}
    )
    position_values: dict[int, list[float]] = field(
        default_factory=lambda: {b: [] for b in range(behavior.NUM_POSITION_BUCKETS)}
    )
    distance_values: dict[int, list[float]] = field(default_factory=dict)
    production_occurrences: dict[str, list[list[float]]] = field(default_factory=dict)
    attention_values: dict[int, list[float]] = field(default_factory=dict)
    projection_values: dict[int, dict[int, list[float]]] = field(
        default_factory=lambda: {off: {} for off in attn.PROJECTION_OFFSETS}
    )
    documents: int = 0
    skipped_documents: int = 0
    steps: int = 0
    words: int = 0
    sentences: int = 0
    skipped_sentences: int = 0


@dataclass(frozen=True)
class ReportBundle:
    out_dir: str
    manifest: dict
    summary: dict


# ---------------------------------------------------------------------------
# Per-document processing


def process_document(
    doc: TraceDocument,
    config: RunConfig,
    state: CorpusState,
    parses_override: Sequence[str] | None = None,
) -> None:
    """Run the selected analyses for one validated document and fold the
    results into the corpus state. Raises TracelensError subclasses on
    analysis-level failures; callers decide the skip policy."""
    wordseq = segment_sentences(detokenize(doc), doc)
    pred = prediction_entropies(doc, config.nucleus_p)
    word_entropies = [float(pred[w.first_step]) for w in wordseq.words]

    if "copy" in config.analyses:
        labels = behavior.classify_bigrams(
            wordseq,
            source_words(doc),
            case_fold=config.case_fold,
            step_entropies=pred,
        )
        for item in labels:
            if item.label is not behavior.Label.UNDEFINED:
                state.copy_values[item.label.value].append(float(item.entropy))

    if "position" in config.analyses:
        buckets = behavior.relative_positions(wordseq)
        for b, h in zip(buckets, word_entropies):
            state.position_values[behavior.decile_index(b)].append(h)

    if "syntax" in config.analyses:
        _process_syntax(doc, wordseq, word_entropies, config, state, parses_override)

    if "attention" in config.analyses:
        att = attn.normalize_rows(attn.doc_attention(doc))
        q = config.q if config.q is not None else attn.default_q(att.source_len)
        block = attn.compute_block_set(att, q, config.block_fraction)
        att_ent = attn.attention_entropies(att, block)
        buckets = attn.entropy_buckets(pred, config.bucket_width)
        for b, h in zip(buckets, att_ent):
            state.attention_values.setdefault(int(b), []).append(float(h))
        proj = attn.vocabulary_projections(doc, att, block)
        for k, off in enumerate(attn.PROJECTION_OFFSETS):
            store = state.projection_values[off]
            for b, value in zip(buckets, proj[:, k]):
                if not math.isnan(value):
                    store.setdefault(int(b), []).append(float(value))

    state.documents += 1
    state.steps += doc.num_steps
    state.words += len(wordseq.words)
    state.sentences += len(wordseq.sentence_spans)


def _process_syntax(
    doc: TraceDocument,
    wordseq,
    word_entropies: list[float],
    config: RunConfig,
    state: CorpusState,
    parses_override: Sequence[str] | None,
) -> None:
    parses = parses_override if parses_override is not None else doc.parses
    if not parses:
        return
    for i, (a, b) in enumerate(wordseq.sentence_spans):
        if i >= len(parses) or parses[i] is None:
            continue
        texts = [w.text for w in wordseq.words[a:b]]
        entropies = word_entropies[a:b]
        try:
            tree = syntax.parse_bracketed_tree(parses[i])
            records = syntax.sentence_distance_deltas(
                tree, texts, entropies, strip=config.strip_preterminals
            )
            spans = syntax.align_words_to_leaves(texts, tree.leaves())
        except TracelensError:
            state.skipped_sentences += 1
            continue
        for rec in records:
            state.distance_values.setdefault(rec.distance, []).append(
                rec.entropy_change_pct
            )
        per_leaf = syntax.leaf_entropies(spans, entropies, len(tree.leaves()))
        for rule, child_means in syntax.collect_productions(tree, per_leaf):
            state.production_occurrences.setdefault(rule, []).append(list(child_means))


# ---------------------------------------------------------------------------
# Pipeline


def load_parse_sidecar(path: str) -> dict[str, dict[int, str]]:
    """Read a tab-separated parse sidecar: doc_id, sentence index, tree."""
    if not os.path.exists(path):
        raise MissingInput(f"parse sidecar not found: {path}")
    table: dict[str, dict[int, str]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t", 2)
            if len(parts) != 3:
                raise InvalidConfig(
                    f"{path}:{lineno}: expected 'doc_id<TAB>index<TAB>tree'"
                )
            doc_id, idx, tree = parts
            try:
                sentence = int(idx)
            except ValueError:
                raise InvalidConfig(
                    f"{path}:{lineno}: sentence index {idx!r} is not an integer"
                ) from None
            table.setdefault(doc_id, {})[sentence] = tree
    return table


def run_pipeline(config: RunConfig) -> ReportBundle:
    """Stream every input trace file through the selected analyses and write
    the report bundle. Documents failing parse, validation or analysis are
    skipped and counted; file-level problems raise."""
    config.validate()
    if not config.inputs:
        raise MissingInput("no input trace files given")
    sidecar = (
        load_parse_sidecar(config.parse_sidecar) if config.parse_sidecar else None
    )
    state = CorpusState()
    for path in config.inputs:
        if not os.path.exists(path):
            raise MissingInput(f"input not found: {path}")
        for lineno, line in enumerate(open_trace(path), 2):
            try:
                doc = parse_trace_line(line)
            except TracelensError as exc:
                logger.warning("%s:%d: skipping unparseable record: %s", path, lineno, exc)
                state.skipped_documents += 1
                continue
            result = validate_document(doc)
            if not result.ok:
                first = result.violations[0]
                logger.warning(
                    "%s: skipping invalid document %s (%s: %s)",
                    path, doc.doc_id, first.rule, first.message,
                )
                state.skipped_documents += 1
                continue
            override = None
            if sidecar is not None and doc.doc_id in sidecar:
                per_doc = sidecar[doc.doc_id]
                override = [
                    per_doc.get(i) for i in range(max(per_doc) + 1)
                ]
            try:
                process_document(doc, config, state, parses_override=override)
            except TracelensError as exc:
                logger.warning("%s: skipping document %s: %s", path, doc.doc_id, exc)
                state.skipped_documents += 1
                continue
    return write_bundle(config, state)


# ---------------------------------------------------------------------------
# Bundle writing


def _fmt(value) -> str:
    if value is None:
        return "nan"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def _write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _sorted_state(state: CorpusState) -> CorpusState:
    """Canonicalize all accumulators: every value list sorted ascending, so
    downstream statistics do not depend on document order."""
    return replace(
        state,
        copy_values={k: sorted(v) for k, v in state.copy_values.items()},
        position_values={k: sorted(v) for k, v in state.position_values.items()},
        distance_values={k: sorted(v) for k, v in state.distance_values.items()},
        production_occurrences={
            k: sorted(v) for k, v in state.production_occurrences.items()
        },
        attention_values={k: sorted(v) for k, v in state.attention_values.items()},
        projection_values={
            off: {b: sorted(v) for b, v in per.items()}
            for off, per in state.projection_values.items()
        },
    )


def write_bundle(config: RunConfig, state: CorpusState) -> ReportBundle:
    out_dir = config.out_dir
    if not out_dir:
        raise InvalidConfig("output directory not set")
    os.makedirs(os.path.join(out_dir, "sidecars"), exist_ok=True)
    state = _sorted_state(state)
    summary: dict = {}
    tables: list[str] = []

    if "copy" in config.analyses:
        tables.append(_write_copy(config, state, out_dir, summary))
    if "position" in config.analyses:
        tables.append(_write_position(config, state, out_dir, summary))
    if "syntax" in config.analyses:
        tables.extend(_write_syntax(config, state, out_dir, summary))
    if "attention" in config.analyses:
        tables.extend(_write_attention(config, state, out_dir, summary))

    manifest = {
        "trace_format_version": TRACE_FORMAT_VERSION,
        "config": config.echo(),
        "documents": state.documents,
        "skipped_documents": state.skipped_documents,
        "steps": state.steps,
        "words": state.words,
        "sentences": state.sentences,
        "skipped_sentences": state.skipped_sentences,
        "tables": tables,
    }
    _write_json(os.path.join(out_dir, "manifest.json"), manifest)
    _write_json(os.path.join(out_dir, "summary.json"), summary)
    return ReportBundle(out_dir=out_dir, manifest=manifest, summary=summary)


def _write_copy(config, state, out_dir, summary) -> str:
    _write_json(os.path.join(out_dir, "sidecars", "copy.json"), state.copy_values)
    values = {
        behavior.Label.EXISTING: np.asarray(state.copy_values["existing"]),
        behavior.Label.NOVEL: np.asarray(state.copy_values["novel"]),
    }
    hist = behavior.histogram_from_values(values, config.bin_width, config.truncate_at)
    rows = []
    for label in (behavior.Label.EXISTING, behavior.Label.NOVEL):
        for i, count in enumerate(hist.counts[label]):
            rows.append(
                (label.value, i * config.bin_width, (i + 1) * config.bin_width, int(count))
            )
    name = "copy_histogram.csv"
    _write_csv(os.path.join(out_dir, name), ("class", "bin_lo", "bin_hi", "count"), rows)
    summary["copy"] = {
        label.value: {
            "median": hist.medians[label],
            "count": int(len(values[label])),
        }
        for label in (behavior.Label.EXISTING, behavior.Label.NOVEL)
    }
    return name


def _write_position(config, state, out_dir, summary) -> str:
    _write_json(
        os.path.join(out_dir, "sidecars", "position.json"),
        {str(k): v for k, v in state.position_values.items()},
    )
    rows = []
    buckets_summary = []
    for b in range(behavior.NUM_POSITION_BUCKETS):
        vals = np.asarray(state.position_values[b])
        count = len(vals)
        mean = float(np.mean(vals)) if count else None
        median = float(np.median(vals)) if count else None
        rows.append((b / 10, mean, median, count))
        buckets_summary.append(
            {"bucket": b / 10, "mean": mean, "median": median, "count": count}
        )
    name = "position_profile.csv"
    _write_csv(os.path.join(out_dir, name), ("bucket", "mean", "median", "count"), rows)
    summary["position"] = {"buckets": buckets_summary}
    return name


def _write_syntax(config, state, out_dir, summary) -> list[str]:
    _write_json(
        os.path.join(out_dir, "sidecars", "syntax_distance.json"),
        {str(k): v for k, v in state.distance_values.items()},
    )
    _write_json(
        os.path.join(out_dir, "sidecars", "syntax_productions.json"),
        state.production_occurrences,
    )
    stats = syntax.group_distance_stats(
        state.distance_values, skipped_sentences=state.skipped_sentences
    )
    dist_rows = [
        (g.distance, g.median_pct, g.mean_pct, g.count) for g in stats.groups
    ]
    _write_csv(
        os.path.join(out_dir, "syntax_distance.csv"),
        ("distance", "median_pct_change", "mean_pct_change", "count"),
        dist_rows,
    )
    table = syntax.production_table(
        {k: [tuple(o) for o in v] for k, v in state.production_occurrences.items()},
        min_count=config.min_rule_count,
    )
    _write_csv(
        os.path.join(out_dir, "syntax_productions.csv"),
        ("rule", "mean_entropy", "count"),
        [(s.rule, s.mean_entropy, s.count) for s in table],
    )
    summary["syntax"] = {
        "distance_groups": [
            {
                "distance": g.distance,
                "median_pct": g.median_pct,
                "mean_pct": g.mean_pct,
                "count": g.count,
            }
            for g in stats.groups
        ],
        "spearman": stats.spearman,
        "boundaries": stats.boundaries,
        "skipped_sentences": state.skipped_sentences,
        "rules": [
            {
                "rule": s.rule,
                "mean_entropy": s.mean_entropy,
                "count": s.count,
                "child_means": list(s.child_means),
            }
            for s in table
        ],
    }
    return ["syntax_distance.csv", "syntax_productions.csv"]


def _write_attention(config, state, out_dir, summary) -> list[str]:
    _write_json(
        os.path.join(out_dir, "sidecars", "attention_entropy.json"),
        {str(k): v for k, v in state.attention_values.items()},
    )
    _write_json(
        os.path.join(out_dir, "sidecars", "attention_projection.json"),
        {
            str(off): {str(b): v for b, v in per.items()}
            for off, per in state.projection_values.items()
        },
    )
    width = config.bucket_width
    ent_rows = []
    ent_summary = []
    for b in sorted(state.attention_values):
        vals = np.asarray(state.attention_values[b])
        mean = float(np.mean(vals))
        ent_rows.append((b * width, (b + 1) * width, mean, len(vals)))
        ent_summary.append(
            {"bucket_lo": b * width, "bucket_hi": (b + 1) * width,
             "mean": mean, "count": len(vals)}
        )
    _write_csv(
        os.path.join(out_dir, "attention_entropy.csv"),
        ("bucket_lo", "bucket_hi", "mean_attention_entropy", "count"),
        ent_rows,
    )
    proj_rows = []
    proj_summary: dict[str, list] = {}
    for off in attn.PROJECTION_OFFSETS:
        per = state.projection_values[off]
        entries = []
        for b in sorted(per):
            vals = np.asarray(per[b])
            mean = float(np.mean(vals))
            proj_rows.append((off, b * width, (b + 1) * width, mean, len(vals)))
            entries.append(
                {"bucket_lo": b * width, "bucket_hi": (b + 1) * width,
                 "mean": mean, "count": len(vals)}
            )
        proj_summary[str(off)] = entries
    _write_csv(
        os.path.join(out_dir, "attention_projection.csv"),
        ("offset", "bucket_lo", "bucket_hi", "mean_projection", "count"),
        proj_rows,
    )
    summary["attention"] = {
        "entropy_buckets": ent_summary,
        "projection": proj_summary,
    }
    return ["attention_entropy.csv", "attention_projection.csv"]


# ---------------------------------------------------------------------------
# Merging


def _load_json(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def load_bundle_state(bundle_dir: str) -> tuple[dict, CorpusState]:
    manifest_path = os.path.join(bundle_dir, "manifest.json")
    if not os.path.exists(manifest_path):
        raise MissingInput(f"no manifest.json in {bundle_dir}")
    manifest = _load_json(manifest_path)
    state = CorpusState()
    state.documents = manifest["documents"]
    state.skipped_documents = manifest["skipped_documents"]
    state.steps = manifest["steps"]
    state.words = manifest["words"]
    state.sentences = manifest["sentences"]
    state.skipped_sentences = manifest["skipped_sentences"]
    side = os.path.join(bundle_dir, "sidecars")
    analyses = manifest["config"]["analyses"]
    if "copy" in analyses:
        state.copy_values = _load_json(os.path.join(side, "copy.json"))
    if "position" in analyses:
        raw = _load_json(os.path.join(side, "position.json"))
        state.position_values = {int(k): v for k, v in raw.items()}
    if "syntax" in analyses:
        raw = _load_json(os.path.join(side, "syntax_distance.json"))
        state.distance_values = {int(k): v for k, v in raw.items()}
        state.production_occurrences = _load_json(
            os.path.join(side, "syntax_productions.json")
        )
    if "attention" in analyses:
        raw = _load_json(os.path.join(side, "attention_entropy.json"))
        state.attention_values = {int(k): v for k, v in raw.items()}
        raw = _load_json(os.path.join(side, "attention_projection.json"))
        state.projection_values = {
            int(off): {int(b): v for b, v in per.items()} for off, per in raw.items()
        }
    return manifest, state


def merge_states(target: CorpusState, other: CorpusState) -> None:
    for k, v in other.copy_values.items():
        target.copy_values.setdefault(k, []).extend(v)
    for k, v in other.position_values.items():
        target.position_values.setdefault(k, []).extend(v)
    for k, v in other.distance_values.items():
        target.distance_values.setdefault(k, []).extend(v)
    for k, v in other.production_occurrences.items():
        target.production_occurrences.setdefault(k, []).extend(v)
    for k, v in other.attention_values.items():
        target.attention_values.setdefault(k, []).extend(v)
    for off, per in other.projection_values.items():
        store = target.projection_values.setdefault(off, {})
        for b, v in per.items():
            store.setdefault(b, []).extend(v)
    target.documents += other.documents
    target.skipped_documents += other.skipped_documents
    target.steps += other.steps
    target.words += other.words
    target.sentences += other.sentences
    target.skipped_sentences += other.skipped_sentences


def merge_reports(bundle_dirs: Sequence[str], out_dir: str) -> ReportBundle:
    """Merge shard bundles produced under an identical configuration into one
    bundle equal to a single-pass run over the union of their corpora."""
    if not bundle_dirs:
        raise MissingInput("no bundles to merge")
    merged_state = CorpusState()
    reference_echo: dict | None = None
    for bundle_dir in bundle_dirs:
        manifest, state = load_bundle_state(bundle_dir)
        echo = manifest["config"]
        if reference_echo is None:
            reference_echo = echo
        elif echo != reference_echo:
            raise ConfigMismatch(
                f"bundle {bundle_dir} was produced under a different configuration"
            )
        merge_states(merged_state, state)
    assert reference_echo is not None
    config = replace(RunConfig.from_echo(reference_echo), out_dir=out_dir)
    return write_bundle(config, merged_state)
