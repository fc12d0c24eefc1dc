import type { EmbedBackend } from "./backend.js";

/**
 * Real-model backend over a feature-extraction pipeline.
 *
 * Vectors are the mean-pooled last hidden state, left unnormalized:
 * downstream similarity is cosine, which normalizes anyway. The heavy
 * runtime is imported lazily so the service (and its tests) work without
 * the optional dependency installed; pass any ONNX-exported retriever
 * checkpoint id via EMBED_MODEL.
 */
export class TransformerBackend implements EmbedBackend {
  readonly name: string;
  private pipe: ((text: string, opts: object) => Promise<{ data: ArrayLike<number> }>) | null =
    null;
  private dimension: number | null = null;
  private loading: Promise<void> | null = null;
  loadError: Error | null = null;

  constructor(
    readonly modelId: string,
    readonly device?: string,
  ) {
    this.name = `transformer:${modelId}`;
  }

  /** Kick off (or join) the model load; resolves when ready. */
  start(): Promise<void> {
    if (!this.loading) {
      this.loading = this.load().catch((err) => {
        this.loadError = err instanceof Error ? err : new Error(String(err));
        throw this.loadError;
      });
    }
    return this.loading;
  }

  private async load(): Promise<void> {
    const moduleId = "@huggingface/transformers";
    let transformers;
    try {
      transformers = await import(moduleId);
    } catch {
      throw new Error(
        `${moduleId} is not installed; ` +
          `"npm install ${moduleId}" or run the hash backend instead`,
      );
    }
    const options: Record<string, unknown> = {};
    if (this.device) options.device = this.device;
    this.pipe = await transformers.pipeline(
      "feature-extraction",
      this.modelId,
      options,
    );
    const probe = await this.pipe!("dimension probe", {
      pooling: "mean",
      normalize: false,
    });
    this.dimension = probe.data.length;
  }

  ready(): boolean {
    return this.pipe !== null && this.dimension !== null;
  }

  dim(): number {
    if (this.dimension === null) throw new Error("model is still loading");
    return this.dimension;
  }

  async embed(texts: string[]): Promise<number[][]> {
    if (!this.pipe) throw new Error("model is still loading");
    const out: number[][] = [];
    // sequential keeps peak memory bounded; batching happens upstream
    for (const text of texts) {
      const tensor = await this.pipe(text, { pooling: "mean", normalize: false });
      out.push(Array.from(tensor.data, Number));
    }
    return out;
  }
}
