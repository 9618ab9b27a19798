/** Seeded client-side randomization for blinded pane placement.
 *
 * Placement must be reproducible per (case, pair) so a reload shows the same
 * layout, and the seed is persisted with the verdict for the position-bias
 * audit.
 */

import type { DisplayAssignment } from "./types.js";

/** FNV-1a over a string; cheap, stable, good enough to seed the PRNG. */
export function hashSeed(text: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

/** mulberry32: small deterministic PRNG over a 32-bit state. */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) | 0;
    let t = Math.imul(state ^ (state >>> 15), 1 | state);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/**
 * Assign the pair's responses to panes A/B with probability 1/2 each way.
 * Identical inputs always produce the identical assignment.
 */
export function assignDisplay(
  caseId: string,
  pair: [string, string],
  sessionSeed = 0,
): DisplayAssignment {
  const clientSeed = (hashSeed(`${caseId}::${pair[0]}::${pair[1]}`) ^ sessionSeed) >>> 0;
  const leftIsFirst = mulberry32(clientSeed)() < 0.5;
  const [a, b] = leftIsFirst ? [pair[0], pair[1]] : [pair[1], pair[0]];
  return {
    caseId,
    pair,
    actualModelA: a,
    actualModelB: b,
    displayedAsA: "Model A",
    displayedAsB: "Model B",
    clientSeed,
  };
}
