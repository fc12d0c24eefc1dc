"""Corpus-wide entity candidate pool.

Every (document, node) pair becomes one pool entry carrying the node's
relation map, the embeddings of its distinct mention surfaces, and the
embeddings of each mention's context snippet (the mention plus up to 16
tokens on each side of it, sentence boundaries ignored). The pool is the
search space for alternative entities and is persisted as JSON-lines so
repeated generation runs reuse the same embeddings.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .corpus_io import CorpusFile
from .kernels import normalize_rows
from .model import Document, Mention, flat_tokens, sentence_offsets

HEAD = "head"
TAIL = "tail"
CONTEXT_WINDOW = 16

# (relation id, HEAD or TAIL)
RelationMapEntry = tuple[str, str]


class PoolError(Exception):
    pass


@dataclass(frozen=True, eq=False)
class CandidateEntry:
    """One entity node's searchable features.

    Equality is identity; ndarray fields make field-wise comparison
    ambiguous.
    """

    doc_title: str
    node_index: int
    types: frozenset[str]
    mention_surfaces: tuple[str, ...]
    mention_vecs: np.ndarray  # (len(mention_surfaces), dim)
    context_texts: tuple[str, ...]
    context_vecs: np.ndarray  # (len(context_texts), dim)
    rel_map: frozenset[RelationMapEntry]

    def __post_init__(self):
        if len(self.mention_surfaces) == 0:
            raise PoolError(
                f"entry {self.doc_title!r}#{self.node_index}: no mentions"
            )
        if self.mention_vecs.shape[0] != len(self.mention_surfaces):
            raise PoolError(
                f"entry {self.doc_title!r}#{self.node_index}: "
                "mention vector count mismatch"
            )
        if self.context_vecs.shape[0] != len(self.context_texts):
            raise PoolError(
                f"entry {self.doc_title!r}#{self.node_index}: "
                "context vector count mismatch"
            )

    @property
    def surface_set(self) -> frozenset[str]:
        return frozenset(self.mention_surfaces)


@dataclass
class _PackedVectors:
    """Pool vectors stacked row-wise for the segmented kernels."""

    matrix: np.ndarray  # normalized rows
    starts: np.ndarray
    ends: np.ndarray


@dataclass
class Pool:
    entries: tuple[CandidateEntry, ...]
    dim: int
    provenance: dict
    _index: dict | None = field(default=None, repr=False)
    _packed_mentions: _PackedVectors | None = field(default=None, repr=False)
    _packed_contexts: _PackedVectors | None = field(default=None, repr=False)

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            key = (e.doc_title, e.node_index)
            if key in seen:
                raise PoolError(f"duplicate pool entry {key}")
            seen.add(key)
            for mat, what in ((e.mention_vecs, "mention"), (e.context_vecs, "context")):
                if mat.shape[0] and mat.shape[1] != self.dim:
                    raise PoolError(
                        f"entry {key}: {what} dim {mat.shape[1]} != pool dim {self.dim}"
                    )

    def entry_for(self, doc_title: str, node_index: int) -> CandidateEntry:
        if self._index is None:
            self._index = {
                (e.doc_title, e.node_index): e for e in self.entries
            }
        try:
            return self._index[(doc_title, node_index)]
        except KeyError:
            raise PoolError(f"no pool entry for {doc_title!r}#{node_index}") from None

    def _pack(self, which: str) -> _PackedVectors:
        mats = [
            e.mention_vecs if which == "mentions" else e.context_vecs
            for e in self.entries
        ]
        lengths = np.array([m.shape[0] for m in mats], dtype=np.int64)
        ends = np.cumsum(lengths)
        starts = ends - lengths
        if mats:
            stacked = np.concatenate(
                [m.reshape(-1, self.dim) for m in mats], axis=0
            )
        else:
            stacked = np.zeros((0, self.dim), dtype=np.float64)
        return _PackedVectors(
            matrix=normalize_rows(stacked, f"pool {which}"), starts=starts, ends=ends
        )

    def packed_mentions(self) -> _PackedVectors:
        if self._packed_mentions is None:
            self._packed_mentions = self._pack("mentions")
        return self._packed_mentions

    def packed_contexts(self) -> _PackedVectors:
        if self._packed_contexts is None:
            self._packed_contexts = self._pack("contexts")
        return self._packed_contexts


def relation_map(doc: Document, node_index: int) -> frozenset[RelationMapEntry]:
    """All (relation, position) pairs the node participates in."""
    if not 0 <= node_index < len(doc.entities):
        raise PoolError(f"node index {node_index} out of range for {doc.title!r}")
    pairs: set[RelationMapEntry] = set()
    for t in doc.triples:
        if t.head == node_index:
            pairs.add((t.relation, HEAD))
        if t.tail == node_index:
            pairs.add((t.relation, TAIL))
    return frozenset(pairs)


def context_snippet(doc: Document, mention: Mention, window: int = CONTEXT_WINDOW) -> str:
    """The mention plus up to ``window`` tokens on each side, space-joined.

    The window is taken over the flattened document token sequence, so it
    crosses sentence boundaries and is clipped at the document edges.
    """
    tokens = flat_tokens(doc)
    offset = sentence_offsets(doc)[mention.sent_id]
    lo = max(0, offset + mention.start - window)
    hi = min(len(tokens), offset + mention.end + window)
    return " ".join(tokens[lo:hi])


def node_embedding_texts(doc: Document, node_index: int) -> tuple[list[str], list[str]]:
    """Texts needing embeddings for one node: distinct surfaces, snippets."""
    node = doc.entities[node_index]
    surfaces = list(node.surfaces)
    snippets = [context_snippet(doc, m) for m in node.mentions]
    return surfaces, snippets


def collect_embedding_texts(corpus: CorpusFile) -> list[str]:
    """Deduplicated manifest of every text the pool build will embed."""
    seen: dict[str, None] = {}
    for doc in corpus.documents:
        for ni in range(len(doc.entities)):
            surfaces, snippets = node_embedding_texts(doc, ni)
            for text in surfaces + snippets:
                seen.setdefault(text, None)
    return list(seen)


def build_pool(corpus: CorpusFile, provider) -> Pool:
    """Build one CandidateEntry per (document, node) over a cleaned corpus."""
    texts = collect_embedding_texts(corpus)
    if not texts:
        raise PoolError("corpus has no entities to pool")
    vectors = provider.embed_batch(texts)
    lookup = dict(zip(texts, vectors))
    dim = vectors[0].size

    entries: list[CandidateEntry] = []
    for doc in corpus.documents:
        for ni, node in enumerate(doc.entities):
            surfaces, snippets = node_embedding_texts(doc, ni)
            entries.append(
                CandidateEntry(
                    doc_title=doc.title,
                    node_index=ni,
                    types=node.types,
                    mention_surfaces=tuple(surfaces),
                    mention_vecs=np.array([lookup[s] for s in surfaces]),
                    context_texts=tuple(snippets),
                    context_vecs=np.array([lookup[s] for s in snippets]),
                    rel_map=relation_map(doc, ni),
                )
            )
    provenance = {
        "corpus": corpus.path,
        "provider_digest": provider.digest,
    }
    return Pool(entries=tuple(entries), dim=dim, provenance=provenance)


def _entry_to_obj(e: CandidateEntry) -> dict:
    return {
        "doc_title": e.doc_title,
        "node_index": e.node_index,
        "types": sorted(e.types),
        "mentions": [
            {"surface": s, "vec": vec.tolist()}
            for s, vec in zip(e.mention_surfaces, e.mention_vecs)
        ],
        "contexts": [
            {"text": t, "vec": vec.tolist()}
            for t, vec in zip(e.context_texts, e.context_vecs)
        ],
        "rel_map": sorted([list(p) for p in e.rel_map]),
    }


def _entry_from_obj(obj: dict, dim: int, ln: int) -> CandidateEntry:
    try:
        mentions = obj["mentions"]
        contexts = obj["contexts"]
        return CandidateEntry(
            doc_title=obj["doc_title"],
            node_index=int(obj["node_index"]),
            types=frozenset(obj["types"]),
            mention_surfaces=tuple(m["surface"] for m in mentions),
            mention_vecs=np.array(
                [m["vec"] for m in mentions], dtype=np.float64
            ).reshape(len(mentions), dim),
            context_texts=tuple(c["text"] for c in contexts),
            context_vecs=np.array(
                [c["vec"] for c in contexts], dtype=np.float64
            ).reshape(len(contexts), dim),
            rel_map=frozenset((r, p) for r, p in obj["rel_map"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise PoolError(f"pool line {ln}: malformed entry: {exc}") from exc


def save_pool(pool: Pool, path: str) -> None:
    header = {"dim": pool.dim, "provenance": pool.provenance}
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(header, ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")
            for e in pool.entries:
                fh.write(
                    json.dumps(_entry_to_obj(e), ensure_ascii=False,
                               separators=(",", ":"))
                )
                fh.write("\n")
    except OSError as exc:
        raise PoolError(f"cannot write pool {path}: {exc}") from exc


def load_pool(
    path: str, expected_provider_digest: str | None = None, force: bool = False
) -> Pool:
    """Load a pool file, refusing a provider digest mismatch unless forced."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise PoolError(f"cannot read pool {path}: {exc}") from exc
    if not lines:
        raise PoolError(f"pool file {path} is empty")
    try:
        header = json.loads(lines[0])
        dim = int(header["dim"])
        provenance = dict(header["provenance"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise PoolError(f"pool file {path}: bad header: {exc}") from exc
    stored = provenance.get("provider_digest")
    if expected_provider_digest is not None and stored != expected_provider_digest:
        if not force:
            raise PoolError(
                f"pool {path} was built with provider digest {stored}, "
                f"expected {expected_provider_digest}; pass force to override"
            )
    entries = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise PoolError(f"pool line {ln}: bad JSON: {exc.msg}") from exc
        entries.append(_entry_from_obj(obj, dim, ln))
    return Pool(entries=tuple(entries), dim=dim, provenance=provenance)
