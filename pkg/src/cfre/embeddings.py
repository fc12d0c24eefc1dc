"""Embedding providers: a uniform way to turn text into fixed-dim vectors.

Three provider kinds share one contract (``embed_batch`` is order-preserving
and deterministic within a run):

* ``test_hash``  - hermetic pseudo-random unit vectors derived from a seeded
  hash of the text; no model, stable across runs and platforms.
* ``cache_file`` - JSON-lines file of ``{"text": ..., "vec": [...]}`` entries;
  misses are errors.
* ``http_service`` - remote service speaking ``POST {base}/embed`` with body
  ``{"texts": [...]}`` returning ``{"vectors": [[...]], "dim": N}`` and
  ``GET {base}/health`` returning ``ok``.
"""
from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
import requests

log = logging.getLogger(__name__)

HTTP_BATCH_LIMIT = 256
HTTP_RETRIES = 3


class EmbeddingError(Exception):
    pass


class CacheMissError(EmbeddingError):
    def __init__(self, missing: Sequence[str]):
        preview = ", ".join(repr(t) for t in list(missing)[:5])
        more = "" if len(missing) <= 5 else f" (+{len(missing) - 5} more)"
        super().__init__(f"{len(missing)} text(s) not in cache: {preview}{more}")
        self.missing = list(missing)


class TransportError(EmbeddingError):
    def __init__(self, url: str, attempts: int, cause: Exception):
        super().__init__(f"embedding service unreachable after {attempts} attempts: "
                         f"{url}: {cause}")
        self.attempts = attempts


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two vectors; errors on zero vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise EmbeddingError(f"dim mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise EmbeddingError("cosine undefined for zero vector")
    return float(np.dot(a, b) / (na * nb))


class Provider(Protocol):
    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]: ...

    @property
    def digest(self) -> str: ...


def _check_batch_input(texts: Sequence[str]) -> None:
    if len(texts) == 0:
        raise EmbeddingError("embed_batch requires at least one text")
    for i, t in enumerate(texts):
        if not isinstance(t, str) or t == "":
            raise EmbeddingError(f"texts[{i}] is empty or not a string")


def _as_finite_matrix_rows(rows: Sequence[Sequence[float]], where: str) -> list[np.ndarray]:
    out = []
    dim = None
    for i, row in enumerate(rows):
        vec = np.asarray(row, dtype=np.float64)
        if vec.ndim != 1 or vec.size == 0:
            raise EmbeddingError(f"{where}: vector {i} is not a nonempty 1-d vector")
        if not np.all(np.isfinite(vec)):
            raise EmbeddingError(f"{where}: vector {i} has non-finite values")
        if dim is None:
            dim = vec.size
        elif vec.size != dim:
            raise EmbeddingError(f"{where}: vector {i} dim {vec.size} != {dim}")
        out.append(vec)
    return out


class HashProvider:
    """Deterministic pseudo-embeddings for hermetic tests.

    Each text hashes (with the seed) to a PCG64 stream that draws ``dim``
    gaussians, normalized to unit length. Approximately uniform on the
    sphere, identical across platforms.
    """

    def __init__(self, dim: int, seed: int = 0):
        if dim <= 0:
            raise EmbeddingError(f"dim must be positive, got {dim}")
        self.dim = dim
        self.seed = seed

    def _vector(self, text: str) -> np.ndarray:
        key = hashlib.sha256(f"{self.seed}\x1f{text}".encode("utf-8")).digest()
        rng = np.random.Generator(np.random.PCG64(int.from_bytes(key[:16], "big")))
        vec = rng.standard_normal(self.dim)
        norm = np.linalg.norm(vec)
        while norm == 0.0:  # astronomically unlikely, but keep the contract total
            vec = rng.standard_normal(self.dim)
            norm = np.linalg.norm(vec)
        return vec / norm

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        _check_batch_input(texts)
        return [self._vector(t) for t in texts]

    @property
    def digest(self) -> str:
        return hashlib.sha256(
            f"test-hash|dim={self.dim}|seed={self.seed}".encode()
        ).hexdigest()


class CacheFileProvider:
    """Serves embeddings precomputed into a JSON-lines cache file."""

    def __init__(self, path: str):
        self.path = str(path)
        self._vectors: dict[str, np.ndarray] = {}
        self.dim: int | None = None
        try:
            with open(self.path, "rb") as fh:
                raw = fh.read()
        except OSError as exc:
            raise EmbeddingError(f"cannot read cache {self.path}: {exc}") from exc
        self._content_digest = hashlib.sha256(raw).hexdigest()
        for ln, line in enumerate(raw.decode("utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise EmbeddingError(f"{self.path}:{ln}: bad JSON: {exc.msg}") from exc
            if not isinstance(obj, dict) or "text" not in obj or "vec" not in obj:
                raise EmbeddingError(f"{self.path}:{ln}: expected {{text, vec}}")
            (vec,) = _as_finite_matrix_rows([obj["vec"]], f"{self.path}:{ln}")
            if self.dim is None:
                self.dim = vec.size
            elif vec.size != self.dim:
                raise EmbeddingError(
                    f"{self.path}:{ln}: dim {vec.size} != cache dim {self.dim}"
                )
            self._vectors[obj["text"]] = vec

    def __contains__(self, text: str) -> bool:
        return text in self._vectors

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        _check_batch_input(texts)
        missing = [t for t in texts if t not in self._vectors]
        if missing:
            raise CacheMissError(missing)
        return [self._vectors[t] for t in texts]

    @property
    def digest(self) -> str:
        return hashlib.sha256(f"cache|{self._content_digest}".encode()).hexdigest()


class HttpProvider:
    """Talks to an embedding service over HTTP.

    Requests are batched at ``HTTP_BATCH_LIMIT`` texts per call and retried
    with exponential backoff. Responses are memoized so identical texts keep
    identical vectors for the lifetime of the provider.
    """

    def __init__(self, base_url: str, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.dim: int | None = None
        self._memo: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()
        self._session = requests.Session()

    def health(self) -> bool:
        try:
            resp = self._session.get(f"{self.base_url}/health", timeout=self.timeout)
            return resp.status_code == 200
        except requests.RequestException:
            return False

    def _post_embed(self, texts: list[str]) -> list[np.ndarray]:
        url = f"{self.base_url}/embed"
        last_exc: Exception | None = None
        for attempt in range(HTTP_RETRIES):
            try:
                resp = self._session.post(
                    url, json={"texts": texts}, timeout=self.timeout
                )
                resp.raise_for_status()
                payload = resp.json()
                vectors = _as_finite_matrix_rows(payload["vectors"], url)
                if len(vectors) != len(texts):
                    raise EmbeddingError(
                        f"{url}: {len(vectors)} vectors for {len(texts)} texts"
                    )
                dim = int(payload.get("dim", vectors[0].size))
                if vectors[0].size != dim:
                    raise EmbeddingError(f"{url}: dim field {dim} != vector size")
                with self._lock:
                    if self.dim is None:
                        self.dim = dim
                    elif self.dim != dim:
                        raise EmbeddingError(
                            f"{url}: dim changed from {self.dim} to {dim}"
                        )
                return vectors
            except (requests.RequestException, KeyError, ValueError) as exc:
                last_exc = exc
                if attempt + 1 < HTTP_RETRIES:
                    time.sleep(0.2 * 2**attempt)
        raise TransportError(url, HTTP_RETRIES, last_exc)  # type: ignore[arg-type]

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        _check_batch_input(texts)
        with self._lock:
            todo = sorted({t for t in texts if t not in self._memo})
        for i in range(0, len(todo), HTTP_BATCH_LIMIT):
            chunk = todo[i : i + HTTP_BATCH_LIMIT]
            vectors = self._post_embed(chunk)
            with self._lock:
                for text, vec in zip(chunk, vectors):
                    self._memo[text] = vec
        with self._lock:
            return [self._memo[t] for t in texts]

    @property
    def digest(self) -> str:
        return hashlib.sha256(f"http|{self.base_url}".encode()).hexdigest()


@dataclass(frozen=True)
class ProviderConfig:
    kind: str  # cache_file | http_service | test_hash
    location: str | None = None
    dim: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("cache_file", "http_service", "test_hash"):
            raise EmbeddingError(f"unknown provider kind {self.kind!r}")
        if self.kind == "test_hash" and (self.dim is None or self.dim <= 0):
            raise EmbeddingError("test_hash provider needs a positive dim")
        if self.kind in ("cache_file", "http_service") and not self.location:
            raise EmbeddingError(f"{self.kind} provider needs a location")


def parse_provider_spec(spec: str) -> ProviderConfig:
    """Parse CLI provider specs: cache:PATH | http:URL | test-hash:DIM[:SEED]."""
    kind, sep, rest = spec.partition(":")
    if not sep or not rest:
        raise EmbeddingError(f"bad provider spec {spec!r}")
    if kind == "cache":
        return ProviderConfig(kind="cache_file", location=rest)
    if kind == "http":
        url = rest if "://" in rest else f"http://{rest}"
        return ProviderConfig(kind="http_service", location=url)
    if kind == "test-hash":
        dim, _, seed = rest.partition(":")
        try:
            return ProviderConfig(
                kind="test_hash", dim=int(dim), seed=int(seed) if seed else 0
            )
        except ValueError as exc:
            raise EmbeddingError(f"bad test-hash spec {spec!r}") from exc
    raise EmbeddingError(f"unknown provider kind {kind!r} in {spec!r}")


def make_provider(config: ProviderConfig):
    if config.kind == "test_hash":
        return HashProvider(dim=config.dim, seed=config.seed)
    if config.kind == "cache_file":
        return CacheFileProvider(config.location)
    return HttpProvider(config.location)
