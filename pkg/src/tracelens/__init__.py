"""Uncertainty diagnostics for seq2seq generation traces."""

from .attention import (
    AggregateAttention,
    BlockSet,
    attention_entropy,
    attention_vs_prediction,
    compute_block_set,
    normalize_rows,
    vocabulary_projection,
)
from .behavior import (
    BigramLabel,
    EntropyHistogram,
    Label,
    PositionProfile,
    classify_bigrams,
    copy_entropy_histogram,
    position_entropy_profile,
    relative_positions,
)
from .entropy import (
    NucleusDistribution,
    entropy,
    nucleus_entropy,
    nucleus_truncate,
    prediction_entropies,
)
from .report import ReportBundle, RunConfig, merge_reports, run_pipeline
from .synth import SynthConfig, generate_synthetic, synth_corpus
from .syntax import (
    ProductionStat,
    TreeNode,
    entropy_change_by_distance,
    parse_bracketed_tree,
    production_entropy_table,
    strip_preterminals,
    syntactic_distances,
)
from .trace import (
    SourceToken,
    StepRecord,
    TraceDocument,
    ValidationReport,
    Word,
    WordSequence,
    detokenize,
    parse_trace_line,
    read_trace_file,
    segment_sentences,
    serialize_document,
    source_words,
    validate_document,
    write_trace_file,
)

__version__ = "0.1.0"
