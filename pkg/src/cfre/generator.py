"""Counterfactual document generation by breadth-first entity replacement.

Starting from the seed document, states are expanded by replacing one more
entity node at a time with a sampled alternative; each state records its
edits so no node is replaced twice. States are deduplicated by the
unordered set of (node, chosen surfaces) pairs, since the final document
does not depend on replacement order. States whose edits affect strictly
more than ``tau_r`` of the seed document's triples are emitted.
"""
from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .altsearch import AltCandidate, SearchThresholds, get_alts
from .corpus_io import CfDocumentRecord, CorpusFile
from .kernels import normalize_rows
from .model import Document, EditStep, EditTuple, EntityNode, Mention
from .pool import CandidateEntry, Pool

DEFAULT_MAX_DOCS = 256


class GeneratorError(Exception):
    pass


@dataclass(frozen=True)
class GenConfig:
    tau_r: float = 0.7
    m_n: int = 3
    search: SearchThresholds = field(default_factory=SearchThresholds)
    seed: int = 0
    max_docs: int = DEFAULT_MAX_DOCS
    runs: int = 1

    def __post_init__(self):
        if not 0.0 <= self.tau_r <= 1.0:
            raise GeneratorError(f"tau_r must be in [0, 1], got {self.tau_r}")
        if self.m_n < 1:
            raise GeneratorError(f"m_n must be >= 1, got {self.m_n}")
        if self.max_docs < 1:
            raise GeneratorError(f"max_docs must be >= 1, got {self.max_docs}")
        if self.runs < 1:
            raise GeneratorError(f"runs must be >= 1, got {self.runs}")


@dataclass(frozen=True)
class EmbeddedSurfaces:
    """A mention-surface set together with each surface's embedding."""

    surfaces: tuple[str, ...]
    vecs: np.ndarray  # (len(surfaces), dim)


def entry_surfaces(entry: CandidateEntry) -> EmbeddedSurfaces:
    return EmbeddedSurfaces(
        surfaces=entry.mention_surfaces, vecs=entry.mention_vecs
    )


def choose_replacement_surfaces(
    original: EmbeddedSurfaces, alt: EmbeddedSurfaces
) -> dict[str, str]:
    """Map each original surface to its embedding-closest alt surface."""
    if len(alt.surfaces) == 0:
        raise GeneratorError("alternative surface set is empty")
    orig = normalize_rows(original.vecs, "original surfaces")
    repl = normalize_rows(alt.vecs, "alternative surfaces")
    best = np.argmax(orig @ repl.T, axis=1)  # ties go to the lower index
    return {
        surface: alt.surfaces[int(best[i])]
        for i, surface in enumerate(original.surfaces)
    }


def _splice(doc: Document, node_index: int, surface_map: dict[str, str]) -> Document:
    """Rewrite every mention of a node, shifting same-sentence spans.

    Replacement surfaces are split on single spaces and spliced into the
    sentence tokens; mentions of other nodes keep their surfaces but their
    spans move by the accumulated token-count delta. Requires a document
    without overlapping mentions.
    """
    per_sentence: dict[int, list[tuple[int, int, Mention]]] = {}
    for ei, node in enumerate(doc.entities):
        for mi, m in enumerate(node.mentions):
            per_sentence.setdefault(m.sent_id, []).append((ei, mi, m))

    new_sents = list(doc.sents)
    new_mentions: dict[tuple[int, int], Mention] = {}
    for sid, items in per_sentence.items():
        items.sort(key=lambda x: x[2].start)
        for (_, _, a), (_, _, b) in zip(items, items[1:]):
            if a.overlaps(b):
                raise GeneratorError(
                    f"document {doc.title!r}: overlapping mentions in sentence {sid}"
                )
        if not any(ei == node_index for ei, _, _ in items):
            continue
        tokens = doc.sents[sid]
        rebuilt: list[str] = []
        cursor = 0
        for ei, mi, m in items:
            rebuilt.extend(tokens[cursor : m.start])
            if ei == node_index:
                try:
                    surface = surface_map[m.surface]
                except KeyError:
                    raise GeneratorError(
                        f"document {doc.title!r}: no replacement chosen for "
                        f"surface {m.surface!r}"
                    ) from None
                span_tokens = surface.split(" ")
            else:
                surface = m.surface
                span_tokens = list(tokens[m.start : m.end])
            start = len(rebuilt)
            rebuilt.extend(span_tokens)
            new_mentions[(ei, mi)] = Mention(
                sent_id=sid,
                start=start,
                end=len(rebuilt),
                surface=surface,
                etype=m.etype,
            )
            cursor = m.end
        rebuilt.extend(tokens[cursor:])
        new_sents[sid] = tuple(rebuilt)

    entities = tuple(
        EntityNode(
            mentions=tuple(
                new_mentions.get((ei, mi), m) for mi, m in enumerate(node.mentions)
            )
        )
        for ei, node in enumerate(doc.entities)
    )
    return Document(
        title=doc.title, sents=tuple(new_sents), entities=entities,
        triples=doc.triples,
    )


def replace(
    doc: Document,
    node_index: int,
    alt: EmbeddedSurfaces,
    original: EmbeddedSurfaces,
) -> Document:
    """Replace one node's mentions with the closest alternative surfaces.

    ``original`` supplies the embeddings of the node's current surfaces;
    types, triples and evidence are untouched.
    """
    if not 0 <= node_index < len(doc.entities):
        raise GeneratorError(f"node index {node_index} out of range")
    return _splice(doc, node_index, choose_replacement_surfaces(original, alt))


def affect_r(edits: Sequence[EditStep], doc: Document) -> float:
    """Fraction of the document's triples touching any replaced node."""
    if not doc.triples:
        return 0.0
    edited = {step.node_index for step in edits}
    hit = sum(1 for t in doc.triples if t.head in edited or t.tail in edited)
    return hit / len(doc.triples)


def _doc_rng(seed: int, run_index: int, title: str) -> np.random.Generator:
    key = hashlib.sha256(
        f"cfre-gen\x1f{seed}\x1f{run_index}\x1f{title}".encode("utf-8")
    ).digest()
    return np.random.Generator(np.random.PCG64(int.from_bytes(key[:16], "big")))


@dataclass(frozen=True)
class _PreparedAlt:
    step: EditStep
    surface_map: dict[str, str]


def _prepare_alts(
    node_index: int, node: EntityNode, target: CandidateEntry,
    alts: list[AltCandidate],
) -> list[_PreparedAlt]:
    prepared = []
    original = entry_surfaces(target)
    for alt in alts:
        surface_map = choose_replacement_surfaces(original, entry_surfaces(alt.entry))
        per_mention = []
        for m in node.mentions:
            if m.surface not in surface_map:
                raise GeneratorError(
                    f"pool entry for node {node_index} does not cover "
                    f"surface {m.surface!r}"
                )
            per_mention.append(surface_map[m.surface])
        prepared.append(
            _PreparedAlt(
                step=EditStep(
                    node_index=node_index,
                    surfaces=alt.surfaces,
                    per_mention=tuple(per_mention),
                ),
                surface_map=surface_map,
            )
        )
    return prepared


def _retitle(doc: Document, title: str) -> Document:
    return Document(
        title=title, sents=doc.sents, entities=doc.entities, triples=doc.triples
    )


def generate(
    doc: Document,
    pool: Pool,
    cfg: GenConfig,
    *,
    target_entries: Sequence[CandidateEntry] | None = None,
    run_index: int = 0,
) -> list[CfDocumentRecord]:
    """All counterfactual records for one seed document (one pass).

    ``target_entries`` overrides the per-node feature lookup; by default
    each node's entry is taken from the pool under the document's title.
    Emitted documents are titled ``{seed title}#cf{k}`` in emission order.
    """
    n = len(doc.entities)
    if target_entries is None:
        entries = [pool.entry_for(doc.title, i) for i in range(n)]
    else:
        if len(target_entries) != n:
            raise GeneratorError(
                f"{len(target_entries)} target entries for {n} nodes"
            )
        entries = list(target_entries)

    prepared: list[list[_PreparedAlt]] = []
    for i in range(n):
        alts = get_alts(entries[i], pool, cfg.search)
        prepared.append(_prepare_alts(i, doc.entities[i], entries[i], alts))

    rng = _doc_rng(cfg.seed, run_index, doc.title)
    StateKey = frozenset
    seed_key: StateKey = frozenset()
    seen: set[StateKey] = {seed_key}
    queue: list[tuple[EditTuple, Document]] = [((), doc)]
    keys: list[StateKey] = [seed_key]
    cf_count = 0
    qi = 0
    while qi < len(queue) and cf_count < cfg.max_docs:
        edits, current = queue[qi]
        key = keys[qi]
        qi += 1
        edited_nodes = {s.node_index for s in edits}
        for i in range(n):
            if i in edited_nodes or not prepared[i]:
                continue
            k = min(cfg.m_n, len(prepared[i]))
            choice = prepared[i][int(rng.integers(k))]
            new_key = key | {
                (i, choice.step.surfaces, choice.step.per_mention)
            }
            if new_key in seen:
                continue
            seen.add(new_key)
            queue.append((edits + (choice.step,), _splice(current, i, choice.surface_map)))
            keys.append(new_key)
            cf_count += 1
            if cf_count >= cfg.max_docs:
                break

    records: list[CfDocumentRecord] = []
    for edits, cf_doc in queue:
        ratio = affect_r(edits, doc)
        if ratio > cfg.tau_r:
            records.append(
                CfDocumentRecord(
                    document=_retitle(cf_doc, f"{doc.title}#cf{len(records)}"),
                    source_title=doc.title,
                    edits=edits,
                    affected_ratio=round(ratio, 6),
                )
            )
    return records


def generate_corpus(
    corpus: CorpusFile,
    pool: Pool,
    cfg: GenConfig,
    *,
    workers: int | None = None,
    target_lookup: Callable[[Document, int], CandidateEntry] | None = None,
) -> list[list[CfDocumentRecord]]:
    """Run ``cfg.runs`` independent generation passes over a corpus.

    Per-document RNG streams derive from (seed, run index, document title),
    so neither document order nor worker count changes any output. Returns
    one record list per run, each in stable corpus document order.
    """
    pool.packed_mentions()
    pool.packed_contexts()
    if workers is None:
        workers = os.cpu_count() or 1

    def entries_for(doc: Document) -> list[CandidateEntry] | None:
        if target_lookup is None:
            return None
        return [target_lookup(doc, i) for i in range(len(doc.entities))]

    runs: list[list[CfDocumentRecord]] = []
    for run_index in range(cfg.runs):
        def one_doc(doc: Document) -> list[CfDocumentRecord]:
            return generate(
                doc, pool, cfg,
                target_entries=entries_for(doc),
                run_index=run_index,
            )

        if workers > 1 and len(corpus.documents) > 1:
            with ThreadPoolExecutor(max_workers=workers) as px:
                per_doc = list(px.map(one_doc, corpus.documents))
        else:
            per_doc = [one_doc(d) for d in corpus.documents]
        runs.append([rec for docrecs in per_doc for rec in docrecs])
    return runs
