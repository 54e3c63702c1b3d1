/**
 * Wire-format types for trace files consumed by the analysis engine, plus
 * the extraction configuration. Field names match the trace file schema
 * exactly (one JSON object per line, version header first).
 */

export const TRACE_FORMAT_VERSION = 1;

export interface SourceTokenRecord {
  position: number;
  token_id: number;
  piece: string;
  begins_word: boolean;
}

export interface StepRecordWire {
  step_index: number;
  output_token_id: number;
  output_piece: string;
  begins_word: boolean;
  topk: [number, number][];
  tail_mass: number;
  attention_row: number[];
}

export interface TraceDocumentWire {
  doc_id: string;
  source_tokens: SourceTokenRecord[];
  steps: StepRecordWire[];
  sentence_spans?: [number, number][];
  parses?: string[];
}

export type DecodeMode = "greedy" | "nucleus";

export interface ExtractionConfig {
  /** Checkpoint identifier, e.g. "toy:42". */
  checkpoint: string;
  mode: DecodeMode;
  /** Nucleus p used when mode is "nucleus". */
  nucleusP: number;
  maxOutputLength: number;
  maxSourceLength: number;
  /** Cumulative probability stored per step; must cover the analysis nucleus. */
  storedMass: number;
  /** Sampling seed (nucleus mode). */
  seed: number;
}

export const DEFAULT_CONFIG: ExtractionConfig = {
  checkpoint: "toy:1",
  mode: "greedy",
  nucleusP: 0.95,
  maxOutputLength: 64,
  maxSourceLength: 512,
  storedMass: 0.995,
  seed: 0,
};

export class CheckpointLoadError extends Error {}
export class InvalidExtractionConfig extends Error {}

export function validateConfig(config: ExtractionConfig): void {
  if (config.storedMass < 0.99 || config.storedMass > 1.0) {
    throw new InvalidExtractionConfig(
      `storedMass ${config.storedMass} outside [0.99, 1.0]`,
    );
  }
  if (config.nucleusP <= 0 || config.nucleusP > 1) {
    throw new InvalidExtractionConfig(`nucleusP ${config.nucleusP} outside (0, 1]`);
  }
  if (config.storedMass < config.nucleusP) {
    throw new InvalidExtractionConfig(
      `storedMass ${config.storedMass} < nucleusP ${config.nucleusP}; ` +
        "analysis nucleus would not be recoverable from the trace",
    );
  }
  if (config.maxOutputLength < 1 || config.maxSourceLength < 1) {
    throw new InvalidExtractionConfig("length limits must be >= 1");
  }
}

/** One decoding step as produced by a model backend. */
export interface BackendStep {
  /** Probability of every vocabulary entry; sums to 1. */
  probs: Float64Array;
  /** Cross-attention summed over all layers and heads; length = source length. */
  attentionRow: Float64Array;
}

/** Minimal surface a seq2seq checkpoint must offer the extractor. */
export interface Seq2SeqBackend {
  readonly vocabSize: number;
  readonly eosId: number;
  readonly startId: number;
  idToPiece(id: number): string;
  pieceBeginsWord(id: number): boolean;
  tokenizeSource(text: string): { id: number; piece: string; beginsWord: boolean }[];
  /** Prepare encoder state for one document; returns the source length used. */
  encode(sourceIds: number[]): void;
  /** Run one decoder step given the previously emitted ids. */
  step(previousIds: number[]): BackendStep;
}
