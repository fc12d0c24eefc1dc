import express, { type NextFunction, type Request, type Response } from "express";
import { z } from "zod";

import type { EmbedBackend } from "./backend.js";

export const MAX_BATCH = 4096;

const EmbedRequest = z.object({
  texts: z
    .array(z.string().min(1, "texts entries must be non-empty strings"))
    .min(1, "texts must not be empty")
    .max(MAX_BATCH, `at most ${MAX_BATCH} texts per request`),
});

/**
 * Wire contract:
 *   GET  /health            -> 200 {status, backend, dim} | 503 while loading
 *   POST /embed {texts:[s]} -> 200 {vectors:[[f]], dim}   | 400 | 503
 *
 * Vectors come back in request order; the endpoint holds no state, so
 * identical texts always produce identical vectors.
 */
export function createApp(backend: EmbedBackend) {
  const app = express();
  app.use(express.json({ limit: "16mb" }));

  app.get("/health", (_req: Request, res: Response) => {
    if (!backend.ready()) {
      res.status(503).json({ status: "loading", backend: backend.name });
      return;
    }
    res.json({ status: "ok", backend: backend.name, dim: backend.dim() });
  });

  app.post("/embed", async (req: Request, res: Response) => {
    if (!backend.ready()) {
      res.status(503).json({ error: "backend is still loading" });
      return;
    }
    const parsed = EmbedRequest.safeParse(req.body);
    if (!parsed.success) {
      const issue = parsed.error.issues[0];
      const where = issue.path.length ? ` at ${issue.path.join(".")}` : "";
      res.status(400).json({ error: `${issue.message}${where}` });
      return;
    }
    try {
      const vectors = await backend.embed(parsed.data.texts);
      res.json({ vectors, dim: backend.dim() });
    } catch (err) {
      res.status(500).json({ error: String(err) });
    }
  });

  // express.json parse failures land here; answer 400, not a stack trace
  app.use((err: Error, _req: Request, res: Response, next: NextFunction) => {
    if (res.headersSent) {
      next(err);
      return;
    }
    res.status(400).json({ error: `malformed request body: ${err.message}` });
  });

  return app;
}
