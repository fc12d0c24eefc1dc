/** A source of embedding vectors behind the HTTP service. */
export interface EmbedBackend {
  /** Stable identifier, reported by /health. */
  readonly name: string;
  /** False while the backend is still loading (service answers 503). */
  ready(): boolean;
  /** Vector dimensionality; only valid once ready. */
  dim(): number;
  /** One vector per input text, order-preserving and deterministic. */
  embed(texts: string[]): Promise<number[][]>;
}
