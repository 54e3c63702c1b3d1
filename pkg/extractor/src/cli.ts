#!/usr/bin/env node
/** CLI: run a checkpoint over a plain-text corpus and write a trace file. */

import { parseArgs } from "node:util";

import { DEFAULT_CONFIG, readCorpus, writeTraceFile } from "./extract.js";
import { DecodeMode, ExtractionConfig } from "./types.js";

function main(): number {
  const { values } = parseArgs({
    options: {
      input: { type: "string" },
      out: { type: "string" },
      checkpoint: { type: "string", default: DEFAULT_CONFIG.checkpoint },
      mode: { type: "string", default: DEFAULT_CONFIG.mode },
      p: { type: "string", default: String(DEFAULT_CONFIG.nucleusP) },
      "stored-mass": { type: "string", default: String(DEFAULT_CONFIG.storedMass) },
      "max-steps": { type: "string", default: String(DEFAULT_CONFIG.maxOutputLength) },
      "max-source": { type: "string", default: String(DEFAULT_CONFIG.maxSourceLength) },
      seed: { type: "string", default: String(DEFAULT_CONFIG.seed) },
    },
  });
  if (!values.input || !values.out) {
    process.stderr.write(
      "usage: tracelens-extract --input corpus.txt --out traces.jsonl " +
        "[--checkpoint toy:1] [--mode greedy|nucleus] [--p 0.95] " +
        "[--stored-mass 0.995] [--max-steps 64] [--max-source 512] [--seed 0]\n",
    );
    return 2;
  }
  const config: ExtractionConfig = {
    checkpoint: values.checkpoint!,
    mode: values.mode as DecodeMode,
    nucleusP: parseFloat(values.p!),
    storedMass: parseFloat(values["stored-mass"]!),
    maxOutputLength: parseInt(values["max-steps"]!, 10),
    maxSourceLength: parseInt(values["max-source"]!, 10),
    seed: parseInt(values.seed!, 10),
  };
  const documents = readCorpus(values.input);
  const result = writeTraceFile(values.out, config, documents);
  process.stdout.write(
    `wrote ${documents.length} documents to ${values.out}` +
      (result.truncatedDocuments > 0
        ? ` (${result.truncatedDocuments} truncated)\n`
        : "\n"),
  );
  return 0;
}

process.exit(main());
