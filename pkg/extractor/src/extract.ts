/**
 * Decode documents through a seq2seq backend and emit trace-file lines: per
 * step the chosen token, the descending probability prefix reaching the
 * configured stored mass, the residual tail mass, and the cross-attention
 * row already summed over heads and layers by the backend.
 */

import * as fs from "node:fs";

import { mulberry32, hash2 } from "./rng.js";
import { ToyModel } from "./toyModel.js";
import {
  DEFAULT_CONFIG,
  ExtractionConfig,
  Seq2SeqBackend,
  StepRecordWire,
  TraceDocumentWire,
  TRACE_FORMAT_VERSION,
  validateConfig,
} from "./types.js";

export interface ExtractionResult {
  lines: string[];
  truncatedDocuments: number;
}

export function loadBackend(
  config: ExtractionConfig,
  corpusLines: string[],
): Seq2SeqBackend {
  return ToyModel.fromCheckpoint(config.checkpoint, corpusLines);
}

/** Descending (id, probability) prefix reaching the stored-mass target;
 * probability ties break toward the lower token id. */
export function storedTopK(
  probs: Float64Array,
  storedMass: number,
): [number, number][] {
  const order = Array.from(probs.keys()).sort((a, b) => {
    const diff = probs[b] - probs[a];
    return diff !== 0 ? diff : a - b;
  });
  const entries: [number, number][] = [];
  let mass = 0.0;
  for (const id of order) {
    const p = probs[id];
    if (p <= 0 && entries.length > 0) {
      break;
    }
    entries.push([id, p]);
    mass += p;
    if (mass >= storedMass - 1e-12) {
      break;
    }
  }
  return entries;
}

function pickGreedy(probs: Float64Array): number {
  let best = 0;
  for (let i = 1; i < probs.length; i++) {
    if (probs[i] > probs[best]) {
      best = i;
    }
  }
  return best;
}

function pickNucleus(
  probs: Float64Array,
  p: number,
  draw: () => number,
): number {
  const order = Array.from(probs.keys()).sort((a, b) => {
    const diff = probs[b] - probs[a];
    return diff !== 0 ? diff : a - b;
  });
  let mass = 0.0;
  const kept: number[] = [];
  for (const id of order) {
    kept.push(id);
    mass += probs[id];
    if (mass >= p - 1e-12) {
      break;
    }
  }
  let u = draw() * mass;
  for (const id of kept) {
    u -= probs[id];
    if (u <= 0) {
      return id;
    }
  }
  return kept[kept.length - 1];
}

export function extractDocument(
  backend: Seq2SeqBackend,
  config: ExtractionConfig,
  docId: string,
  text: string,
  docIndex: number,
): { record: TraceDocumentWire; truncated: boolean } {
  let source = backend.tokenizeSource(text);
  let truncated = false;
  if (source.length > config.maxSourceLength) {
    source = source.slice(0, config.maxSourceLength);
    truncated = true;
  }
  backend.encode(source.map((t) => t.id));
  const draw = mulberry32(hash2(config.seed, docIndex));
  const emitted: number[] = [backend.startId];
  const steps: StepRecordWire[] = [];
  for (let t = 0; t < config.maxOutputLength; t++) {
    const { probs, attentionRow } = backend.step(emitted);
    const winner =
      config.mode === "greedy"
        ? pickGreedy(probs)
        : pickNucleus(probs, config.nucleusP, draw);
    if (winner === backend.eosId) {
      break;
    }
    const topk = storedTopK(probs, config.storedMass);
    let stored = 0.0;
    for (const [, p] of topk) {
      stored += p;
    }
    steps.push({
      step_index: t,
      output_token_id: winner,
      output_piece: backend.idToPiece(winner),
      begins_word: backend.pieceBeginsWord(winner),
      topk,
      tail_mass: Math.max(0.0, 1.0 - stored),
      attention_row: Array.from(attentionRow),
    });
    emitted.push(winner);
  }
  return {
    record: {
      doc_id: docId,
      source_tokens: source.map((tok, position) => ({
        position,
        token_id: tok.id,
        piece: tok.piece,
        begins_word: tok.beginsWord,
      })),
      steps,
    },
    truncated,
  };
}

export function extractTraces(
  config: ExtractionConfig,
  documents: string[],
  backend?: Seq2SeqBackend,
): ExtractionResult {
  validateConfig(config);
  const model = backend ?? loadBackend(config, documents);
  const lines = [JSON.stringify({ trace_format_version: TRACE_FORMAT_VERSION })];
  let truncatedDocuments = 0;
  documents.forEach((text, i) => {
    const { record, truncated } = extractDocument(
      model,
      config,
      `doc-${String(i).padStart(4, "0")}`,
      text,
      i,
    );
    if (truncated) {
      truncatedDocuments += 1;
      process.stderr.write(
        `warning: document ${i} truncated to ${config.maxSourceLength} source tokens\n`,
      );
    }
    lines.push(JSON.stringify(record));
  });
  return { lines, truncatedDocuments };
}

export function readCorpus(path: string): string[] {
  return fs
    .readFileSync(path, "utf-8")
    .split("\n")
    .map((l) => l.trim())
    .filter((l) => l.length > 0);
}

export function writeTraceFile(
  path: string,
  config: ExtractionConfig,
  documents: string[],
): ExtractionResult {
  const result = extractTraces(config, documents);
  fs.writeFileSync(path, result.lines.join("\n") + "\n", "utf-8");
  return result;
}

export { DEFAULT_CONFIG };
