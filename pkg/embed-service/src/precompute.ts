import { appendFileSync, existsSync, readFileSync } from "node:fs";
import { parseArgs } from "node:util";
import { pathToFileURL } from "node:url";

import type { EmbedBackend } from "./backend.js";
import { HashBackend } from "./hash-backend.js";
import { TransformerBackend } from "./transformer-backend.js";

export interface PrecomputeResult {
  written: number;
  skipped: number;
}

function readManifest(path: string): string[] {
  let raw: string;
  try {
    raw = readFileSync(path, "utf-8");
  } catch (err) {
    throw new Error(`cannot read manifest ${path}: ${String(err)}`);
  }
  const texts: string[] = [];
  const seen = new Set<string>();
  for (const line of raw.split("\n")) {
    if (line === "") continue; // trailing newline / blank separators
    if (!seen.has(line)) {
      seen.add(line);
      texts.push(line);
    }
  }
  return texts;
}

function readExistingKeys(path: string): Set<string> {
  const keys = new Set<string>();
  if (!existsSync(path)) return keys;
  const lines = readFileSync(path, "utf-8").split("\n");
  for (let i = 0; i < lines.length; i++) {
    if (lines[i].trim() === "") continue;
    let obj: unknown;
    try {
      obj = JSON.parse(lines[i]);
    } catch {
      throw new Error(`cache ${path}:${i + 1}: bad JSON`);
    }
    const rec = obj as { text?: unknown };
    if (typeof rec.text !== "string") {
      throw new Error(`cache ${path}:${i + 1}: expected {text, vec}`);
    }
    keys.add(rec.text);
  }
  return keys;
}

/**
 * Fill a JSON-lines cache ({"text", "vec"} per line) from a one-text-per-line
 * manifest. Already-cached texts are skipped, so reruns are idempotent and a
 * grown manifest only appends the new entries.
 */
export async function precompute(
  manifestPath: string,
  outPath: string,
  backend: EmbedBackend,
): Promise<PrecomputeResult> {
  const texts = readManifest(manifestPath);
  const existing = readExistingKeys(outPath);
  const todo = texts.filter((t) => !existing.has(t));
  if (todo.length === 0) {
    return { written: 0, skipped: texts.length };
  }
  const vectors = await backend.embed(todo);
  const lines = todo
    .map((text, i) => JSON.stringify({ text, vec: vectors[i] }) + "\n")
    .join("");
  appendFileSync(outPath, lines, "utf-8");
  return { written: todo.length, skipped: texts.length - todo.length };
}

function backendFromFlags(values: {
  backend?: string;
  dim?: string;
  seed?: string;
  model?: string;
  device?: string;
}): EmbedBackend {
  const kind = values.backend ?? "hash";
  if (kind === "hash") {
    return new HashBackend(
      parseInt(values.dim ?? "64", 10),
      parseInt(values.seed ?? "0", 10),
    );
  }
  if (kind === "transformer") {
    return new TransformerBackend(
      values.model ?? "Xenova/all-MiniLM-L6-v2",
      values.device,
    );
  }
  throw new Error(`unknown backend ${kind}; expected hash or transformer`);
}

async function main(): Promise<number> {
  let values;
  try {
    ({ values } = parseArgs({
      options: {
        manifest: { type: "string" },
        out: { type: "string" },
        backend: { type: "string" },
        dim: { type: "string" },
        seed: { type: "string" },
        model: { type: "string" },
        device: { type: "string" },
      },
    }));
  } catch (err) {
    console.error(String(err));
    return 2;
  }
  if (!values.manifest || !values.out) {
    console.error(
      "usage: precompute --manifest PATH --out PATH " +
        "[--backend hash|transformer] [--dim N] [--seed N] [--model ID]",
    );
    return 2;
  }
  try {
    const backend = backendFromFlags(values);
    if (backend instanceof TransformerBackend) await backend.start();
    const result = await precompute(values.manifest, values.out, backend);
    console.log(
      `${result.written} vectors written, ${result.skipped} already cached -> ${values.out}`,
    );
    return 0;
  } catch (err) {
    console.error(err instanceof Error ? err.message : String(err));
    return 1;
  }
}

if (import.meta.url === pathToFileURL(process.argv[1]).href) {
  main().then((code) => {
    process.exitCode = code;
  });
}
