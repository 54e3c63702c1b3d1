/** Small deterministic PRNG (mulberry32) and integer hashing utilities. */

export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Deterministic avalanche hash of two integers into [0, 2^32). */
export function hash2(a: number, b: number): number {
  let h = (Math.imul(a, 2654435761) ^ Math.imul(b, 40503)) >>> 0;
  h ^= h >>> 16;
  h = Math.imul(h, 2246822507) >>> 0;
  h ^= h >>> 13;
  h = Math.imul(h, 3266489909) >>> 0;
  h ^= h >>> 16;
  return h >>> 0;
}

/** Hash mapped into [-1, 1). */
export function signedUnit(a: number, b: number): number {
  return (hash2(a, b) / 2147483648) - 1.0;
}
