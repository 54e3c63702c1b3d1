"""Command-line front end: validate, synth, analyze, merge, report."""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import TracelensError
from .report import ALL_ANALYSES, RunConfig, merge_reports, run_pipeline
from .synth import SynthConfig, synth_corpus
from .trace import (
    open_trace,
    parse_trace_line,
    validate_document,
    write_trace_file,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tracelens",
        description="Uncertainty diagnostics for seq2seq generation traces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="check trace files against the format")
    p_val.add_argument("inputs", nargs="+", help="trace files")

    p_synth = sub.add_parser("synth", help="write a synthetic test corpus")
    p_synth.add_argument("--docs", type=int, default=100)
    p_synth.add_argument("--sentences", type=int, default=10)
    p_synth.add_argument("--words-per-sentence", type=int, default=10)
    p_synth.add_argument("--copy-fraction", type=float, default=0.5)
    p_synth.add_argument("--copy-entropy", type=float, default=0.1)
    p_synth.add_argument("--novel-entropy", type=float, default=2.9)
    p_synth.add_argument("--seed", type=int, default=20,
                         help="base seed; document i uses seed+i")
    p_synth.add_argument("--out", required=True, help="output trace file")

    p_an = sub.add_parser("analyze", help="run analyses and write a report bundle")
    p_an.add_argument("inputs", nargs="+", help="trace files")
    p_an.add_argument("--copy", action="store_true")
    p_an.add_argument("--position", action="store_true")
    p_an.add_argument("--syntax", action="store_true")
    p_an.add_argument("--attention", action="store_true")
    p_an.add_argument("--all", action="store_true", dest="all_analyses")
    p_an.add_argument("--nucleus-p", type=float, default=0.95)
    p_an.add_argument("--bin-width", type=float, default=0.25)
    p_an.add_argument("--truncate-at", type=float, default=5.0)
    p_an.add_argument("--q", type=float, default=None,
                      help="attention threshold; default 10/L per document")
    p_an.add_argument("--block-fraction", type=float, default=0.05)
    p_an.add_argument("--bucket-width", type=float, default=0.25)
    p_an.add_argument("--case-fold", action="store_true")
    p_an.add_argument("--raw-brackets", action="store_true",
                      help="count brackets without stripping the POS layer")
    p_an.add_argument("--min-rule-count", type=int, default=5)
    p_an.add_argument("--parses", default=None,
                      help="sidecar parse file (doc_id<TAB>index<TAB>tree)")
    p_an.add_argument("--out", required=True, help="bundle output directory")

    p_merge = sub.add_parser("merge", help="merge shard bundles")
    p_merge.add_argument("bundles", nargs="+", help="bundle directories")
    p_merge.add_argument("--out", required=True)

    p_rep = sub.add_parser("report", help="print a bundle summary")
    p_rep.add_argument("bundle", help="bundle directory")
    return parser


def cmd_validate(args) -> int:
    any_bad = False
    for path in args.inputs:
        docs = 0
        bad = 0
        for line in open_trace(path):
            docs += 1
            try:
                doc = parse_trace_line(line)
            except TracelensError as exc:
                bad += 1
                print(f"{path}: record {docs}: {exc}")
                continue
            result = validate_document(doc)
            if not result.ok:
                bad += 1
                for v in result.violations:
                    print(f"{path}: {doc.doc_id}: {v.locator}: {v.rule}: {v.message}")
        print(f"{path}: {docs} documents, {bad} invalid")
        any_bad = any_bad or bad > 0
    return 1 if any_bad else 0


def cmd_synth(args) -> int:
    config = SynthConfig(
        sentences=args.sentences,
        words_per_sentence=args.words_per_sentence,
        copy_fraction=args.copy_fraction,
        copy_entropy=args.copy_entropy,
        novel_entropy=args.novel_entropy,
    )
    count = write_trace_file(args.out, synth_corpus(config, args.seed, args.docs))
    print(f"wrote {count} documents to {args.out}")
    return 0


def cmd_analyze(args) -> int:
    selected = [
        name
        for name, chosen in (
            ("copy", args.copy),
            ("position", args.position),
            ("syntax", args.syntax),
            ("attention", args.attention),
        )
        if chosen
    ]
    if args.all_analyses or not selected:
        selected = list(ALL_ANALYSES)
    config = RunConfig(
        nucleus_p=args.nucleus_p,
        bin_width=args.bin_width,
        truncate_at=args.truncate_at,
        q=args.q,
        block_fraction=args.block_fraction,
        bucket_width=args.bucket_width,
        case_fold=args.case_fold,
        strip_preterminals=not args.raw_brackets,
        min_rule_count=args.min_rule_count,
        analyses=tuple(selected),
        inputs=tuple(args.inputs),
        parse_sidecar=args.parses,
        out_dir=args.out,
    )
    bundle = run_pipeline(config)
    m = bundle.manifest
    print(
        f"analyzed {m['documents']} documents "
        f"({m['skipped_documents']} skipped) -> {bundle.out_dir}"
    )
    return 0


def cmd_merge(args) -> int:
    bundle = merge_reports(args.bundles, args.out)
    print(f"merged {len(args.bundles)} bundles -> {bundle.out_dir}")
    return 0


def cmd_report(args) -> int:
    with open(os.path.join(args.bundle, "manifest.json"), encoding="utf-8") as fh:
        manifest = json.load(fh)
    with open(os.path.join(args.bundle, "summary.json"), encoding="utf-8") as fh:
        summary = json.load(fh)
    print(f"bundle: {args.bundle}")
    print(
        f"documents: {manifest['documents']} "
        f"(skipped {manifest['skipped_documents']}), steps: {manifest['steps']}, "
        f"words: {manifest['words']}, sentences: {manifest['sentences']}"
    )
    if "copy" in summary:
        copy = summary["copy"]
        print(
            "bigram entropy medians: "
            f"existing {_num(copy['existing']['median'])} "
            f"(n={copy['existing']['count']}), "
            f"novel {_num(copy['novel']['median'])} (n={copy['novel']['count']})"
        )
    if "position" in summary:
        means = [
            _num(b["mean"]) for b in summary["position"]["buckets"]
        ]
        print("position decile means: " + " ".join(means))
    if "syntax" in summary:
        syn = summary["syntax"]
        print(
            f"syntactic distance groups: {len(syn['distance_groups'])}, "
            f"rank correlation: {_num(syn['spearman'])}, "
            f"skipped sentences: {syn['skipped_sentences']}"
        )
        rules = syn["rules"]
        head = rules[:3]
        tail = [r for r in rules[-3:] if r not in head]
        for rule in head:
            print(
                f"  high-entropy rule: {rule['rule']} "
                f"(mean {_num(rule['mean_entropy'])}, n={rule['count']})"
            )
        for rule in tail:
            print(
                f"  low-entropy rule: {rule['rule']} "
                f"(mean {_num(rule['mean_entropy'])}, n={rule['count']})"
            )
    if "attention" in summary:
        buckets = summary["attention"]["entropy_buckets"]
        if buckets:
            lo = buckets[0]
            print(
                f"attention entropy: lowest bucket [{lo['bucket_lo']}, "
                f"{lo['bucket_hi']}) mean {_num(lo['mean'])} (n={lo['count']}), "
                f"{len(buckets)} buckets"
            )
    return 0


def _num(value) -> str:
    return "nan" if value is None else f"{value:.4f}"


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "validate": cmd_validate,
        "synth": cmd_synth,
        "analyze": cmd_analyze,
        "merge": cmd_merge,
        "report": cmd_report,
    }
    try:
        return handlers[args.command](args)
    except TracelensError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
