import type { EmbedBackend } from "./backend.js";
import { HashBackend } from "./hash-backend.js";
import { createApp } from "./server.js";
import { TransformerBackend } from "./transformer-backend.js";

/**
 * Service entry point. Environment:
 *   EMBED_BACKEND  hash (default) | transformer
 *   EMBED_PORT     listen port (default 8230)
 *   EMBED_DIM      hash backend dimensionality (default 64)
 *   EMBED_SEED     hash backend seed (default 0)
 *   EMBED_MODEL    transformer checkpoint id (default Xenova/all-MiniLM-L6-v2)
 *   EMBED_DEVICE   transformer device hint (e.g. cpu)
 *
 * The transformer backend loads in the background; the service answers 503
 * on /health and /embed until the model is up, or keeps reporting the load
 * error if it never comes up.
 */
function backendFromEnv(): EmbedBackend {
  const kind = process.env.EMBED_BACKEND ?? "hash";
  if (kind === "hash") {
    return new HashBackend(
      parseInt(process.env.EMBED_DIM ?? "64", 10),
      parseInt(process.env.EMBED_SEED ?? "0", 10),
    );
  }
  if (kind === "transformer") {
    return new TransformerBackend(
      process.env.EMBED_MODEL ?? "Xenova/all-MiniLM-L6-v2",
      process.env.EMBED_DEVICE,
    );
  }
  throw new Error(`unknown EMBED_BACKEND ${kind}; expected hash or transformer`);
}

const backend = backendFromEnv();
if (backend instanceof TransformerBackend) {
  backend.start().catch((err) => {
    console.error(`model load failed: ${err.message}`);
  });
}

const port = parseInt(process.env.EMBED_PORT ?? "8230", 10);
const server = createApp(backend).listen(port, () => {
  const addr = server.address();
  const bound = typeof addr === "object" && addr ? addr.port : port;
  console.log(`embed-service listening on :${bound} (${backend.name})`);
});
