/**
 * Deterministic toy seq2seq checkpoint: hash-seeded embeddings, two decoder
 * layers of four cross-attention heads each (summed into the reported
 * attention row), and a pointer-style copy bias that reads off the source
 * token following the attended position. Small enough to run in tests while
 * exercising every real extraction code path: true softmax distributions,
 * multi-head/multi-layer attention aggregation, and subword tokenization.
 */

import { signedUnit } from "./rng.js";
import { tokenizeText, Vocabulary } from "./tokenizer.js";
import { BackendStep, CheckpointLoadError, Seq2SeqBackend } from "./types.js";

const DIM = 24;
const HEADS = 4;
const LAYERS = 2;
const COPY_BOOST = 9.0;
const MATCH_SCALE = 0.4;
const EOS_RAMP = 0.2;
const EOS_BASE = -4.0;
const REPETITION_PENALTY = 3.0;
const REPETITION_WINDOW = 3;

export class ToyModel implements Seq2SeqBackend {
  readonly vocab: Vocabulary;
  readonly eosId: number;
  readonly startId: number;
  private readonly seed: number;
  private readonly embeddings: Float64Array[];
  private sourceIds: number[] = [];
  private keys: Float64Array[] = [];
  /** nextTokenAt[l] = source id at l+1, used by the copy pointer. */
  private nextTokenAt: number[] = [];

  constructor(corpusLines: string[], seed: number) {
    this.seed = seed >>> 0;
    this.vocab = new Vocabulary(["<pad>", "</s>", "<unk>", " ."]);
    this.eosId = 1;
    this.startId = 1;
    for (const line of corpusLines) {
      for (const piece of tokenizeText(line)) {
        this.vocab.intern(piece.piece);
      }
    }
    this.embeddings = [];
    for (let v = 0; v < this.vocab.size; v++) {
      this.embeddings.push(this.embed(v));
    }
  }

  static fromCheckpoint(identifier: string, corpusLines: string[]): ToyModel {
    const match = /^toy(?::(\d+))?$/.exec(identifier);
    if (!match) {
      throw new CheckpointLoadError(
        `cannot load checkpoint ${JSON.stringify(identifier)}; ` +
          'this build ships the deterministic "toy[:seed]" backend only; ' +
          "point real checkpoints at their own Seq2SeqBackend implementation",
      );
    }
    return new ToyModel(corpusLines, match[1] ? parseInt(match[1], 10) : 1);
  }

  get vocabSize(): number {
    return this.vocab.size;
  }

  idToPiece(id: number): string {
    return this.vocab.pieces[id] ?? "<unk>";
  }

  pieceBeginsWord(id: number): boolean {
    const piece = this.idToPiece(id);
    return piece.startsWith(" ") || !piece.match(/^[a-z0-9]/i);
  }

  tokenizeSource(text: string) {
    return tokenizeText(text).map((p) => ({
      id: this.vocab.get(p.piece) ?? 2,
      piece: p.piece,
      beginsWord: p.beginsWord,
    }));
  }

  encode(sourceIds: number[]): void {
    this.sourceIds = sourceIds.slice();
    this.keys = sourceIds.map((id, l) => {
      const key = new Float64Array(DIM);
      const base = this.embeddings[id] ?? this.embed(id);
      for (let d = 0; d < DIM; d++) {
        key[d] = base[d] + 0.3 * signedUnit(l + 7919, d + 65537 + this.seed);
      }
      return key;
    });
    this.nextTokenAt = sourceIds.map((_, l) =>
      l + 1 < sourceIds.length ? sourceIds[l + 1] : -1,
    );
  }

  step(previousIds: number[]): BackendStep {
    const L = this.keys.length;
    if (L === 0) {
      throw new Error("encode() must run before step()");
    }
    const t = previousIds.length - 1;
    const prev = previousIds[previousIds.length - 1];
    const attentionRow = new Float64Array(L);
    let query = this.queryVector(prev, t);
    let context = new Float64Array(DIM);
    let lastLayerMean = new Float64Array(L);
    for (let layer = 0; layer < LAYERS; layer++) {
      const layerMean = new Float64Array(L);
      for (let head = 0; head < HEADS; head++) {
        const weights = this.headWeights(layer * HEADS + head);
        const attention = this.softmaxScores(query, weights);
        for (let l = 0; l < L; l++) {
          attentionRow[l] += attention[l];
          layerMean[l] += attention[l] / HEADS;
        }
      }
      context = new Float64Array(DIM);
      for (let l = 0; l < L; l++) {
        const key = this.keys[l];
        for (let d = 0; d < DIM; d++) {
          context[d] += layerMean[l] * key[d];
        }
      }
      lastLayerMean = layerMean;
      query = context;
    }

    const logits = new Float64Array(this.vocabSize);
    for (let v = 0; v < this.vocabSize; v++) {
      const emb = this.embeddings[v];
      let score = 0.0;
      for (let d = 0; d < DIM; d++) {
        score += context[d] * emb[d];
      }
      logits[v] = MATCH_SCALE * score;
    }
    for (let l = 0; l < L; l++) {
      const following = this.nextTokenAt[l];
      if (following >= 0) {
        logits[following] += COPY_BOOST * lastLayerMean[l];
      }
    }
    // discourage immediate repetition so the copy pointer advances
    const recent = previousIds.slice(-REPETITION_WINDOW);
    for (const id of recent) {
      if (id !== this.eosId) {
        logits[id] -= REPETITION_PENALTY;
      }
    }
    logits[this.eosId] += EOS_BASE + EOS_RAMP * t;
    return { probs: softmax(logits), attentionRow };
  }

  private embed(v: number): Float64Array {
    const out = new Float64Array(DIM);
    for (let d = 0; d < DIM; d++) {
      out[d] = signedUnit(v * 31 + 1, d * 131 + this.seed);
    }
    return out;
  }

  private queryVector(prev: number, t: number): Float64Array {
    const out = new Float64Array(DIM);
    const emb = this.embeddings[prev] ?? this.embed(prev);
    for (let d = 0; d < DIM; d++) {
      out[d] = emb[d] + 0.2 * signedUnit(t + 104729, d + 1299709 + this.seed);
    }
    return out;
  }

  private headWeights(index: number): Float64Array {
    const out = new Float64Array(DIM);
    for (let d = 0; d < DIM; d++) {
      out[d] = 1.0 + 0.5 * signedUnit(index + 15485863, d + 32452843 + this.seed);
    }
    return out;
  }

  private softmaxScores(query: Float64Array, weights: Float64Array): Float64Array {
    const L = this.keys.length;
    const scores = new Float64Array(L);
    const scale = 1.0 / Math.sqrt(DIM);
    for (let l = 0; l < L; l++) {
      const key = this.keys[l];
      let dot = 0.0;
      for (let d = 0; d < DIM; d++) {
        dot += query[d] * key[d] * weights[d];
      }
      scores[l] = dot * scale * 5.0;
    }
    return softmax(scores);
  }
}

export function softmax(logits: Float64Array): Float64Array {
  let max = -Infinity;
  for (const x of logits) {
    if (x > max) max = x;
  }
  const out = new Float64Array(logits.length);
  let total = 0.0;
  for (let i = 0; i < logits.length; i++) {
    const e = Math.exp(logits[i] - max);
    out[i] = e;
    total += e;
  }
  for (let i = 0; i < logits.length; i++) {
    out[i] /= total;
  }
  return out;
}
