import { createHash } from "node:crypto";

import type { EmbedBackend } from "./backend.js";

/**
 * Deterministic pseudo-embeddings for hermetic tests and offline runs.
 *
 * Each text is hashed (together with the seed) into a byte stream that
 * drives a Box-Muller gaussian draw per dimension; the vector is then
 * normalized to unit length. Identical (seed, text) pairs always produce
 * identical vectors, on every platform.
 */
export class HashBackend implements EmbedBackend {
  readonly name: string;

  constructor(
    private readonly dimension: number,
    private readonly seed: number = 0,
  ) {
    if (!Number.isInteger(dimension) || dimension <= 0) {
      throw new Error(`dim must be a positive integer, got ${dimension}`);
    }
    if (!Number.isInteger(seed)) {
      throw new Error(`seed must be an integer, got ${seed}`);
    }
    this.name = `hash:${dimension}:${seed}`;
  }

  ready(): boolean {
    return true;
  }

  dim(): number {
    return this.dimension;
  }

  async embed(texts: string[]): Promise<number[][]> {
    return texts.map((t) => this.vector(t));
  }

  private *bytes(text: string): Generator<number> {
    // counter-chained sha256 blocks give as many bytes as needed
    for (let block = 0; ; block++) {
      const digest = createHash("sha256")
        .update(`${this.seed}\x1f${text}\x1f${block}`)
        .digest();
      for (const b of digest) yield b;
    }
  }

  private vector(text: string): number[] {
    const stream = this.bytes(text);
    const uint32 = () => {
      let v = 0;
      for (let i = 0; i < 4; i++) v = v * 256 + stream.next().value;
      return v;
    };
    const out = new Array<number>(this.dimension);
    for (let i = 0; i < this.dimension; i += 2) {
      // u1 in (0, 1], u2 in [0, 1)
      const u1 = (uint32() + 1) / 4294967296;
      const u2 = uint32() / 4294967296;
      const radius = Math.sqrt(-2 * Math.log(u1));
      out[i] = radius * Math.cos(2 * Math.PI * u2);
      if (i + 1 < this.dimension) out[i + 1] = radius * Math.sin(2 * Math.PI * u2);
    }
    const norm = Math.sqrt(out.reduce((acc, x) => acc + x * x, 0));
    return out.map((x) => x / norm);
  }
}
