/**
 * Wordpiece-style tokenizer for the toy checkpoint. Words longer than a few
 * characters split into chunks, mirroring subword vocabularies; the first
 * piece of a word carries a leading space (the analysis engine strips
 * boundary whitespace) and the begins-word flag.
 */

export interface Piece {
  piece: string;
  beginsWord: boolean;
}

const HEAD_LEN = 4;
const CONT_LEN = 3;
const MAX_WHOLE = 5;

export function splitWord(word: string): string[] {
  if (word.length <= MAX_WHOLE) {
    return [word];
  }
  const parts = [word.slice(0, HEAD_LEN)];
  for (let i = HEAD_LEN; i < word.length; i += CONT_LEN) {
    parts.push(word.slice(i, i + CONT_LEN));
  }
  return parts;
}

export function tokenizeText(text: string): Piece[] {
  const pieces: Piece[] = [];
  for (const word of text.split(/\s+/).filter((w) => w.length > 0)) {
    splitWord(word).forEach((part, i) => {
      pieces.push({
        piece: i === 0 ? ` ${part}` : part,
        beginsWord: i === 0,
      });
    });
  }
  return pieces;
}

/** Stable piece-string to id registry; special tokens occupy low ids. */
export class Vocabulary {
  readonly pieces: string[] = [];
  private readonly ids = new Map<string, number>();

  constructor(specials: string[]) {
    for (const s of specials) {
      this.intern(s);
    }
  }

  intern(piece: string): number {
    const existing = this.ids.get(piece);
    if (existing !== undefined) {
      return existing;
    }
    const id = this.pieces.length;
    this.pieces.push(piece);
    this.ids.set(piece, id);
    return id;
  }

  get(piece: string): number | undefined {
    return this.ids.get(piece);
  }

  get size(): number {
    return this.pieces.length;
  }
}
