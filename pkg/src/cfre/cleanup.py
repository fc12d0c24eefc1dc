"""Mention cleanup: merge nodes sharing a surface, resolve span overlaps.

Run ``merge_shared_mention_entities`` first and ``resolve_overlaps`` second
(``clean_document`` does both). Merging can only add mentions to a node, so
overlap resolution must come last for the no-overlap guarantee to hold.
Both passes are idempotent, pure per document, and keep the triple multiset
up to re-indexing and deduplication.
"""
from __future__ import annotations

import logging

from .corpus_io import CorpusFile
from .model import Document, EntityNode, Mention, RelationTriple

log = logging.getLogger(__name__)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # keep the smaller index as representative for stable output order
            if ra > rb:
                ra, rb = rb, ra
            self.parent[rb] = ra


def _reindex_triples(
    triples: tuple[RelationTriple, ...], mapping: dict[int, int], doc_title: str
) -> tuple[RelationTriple, ...]:
    """Apply a node-index mapping, dropping self-loops and exact duplicates."""
    out: list[RelationTriple] = []
    seen: set[tuple[int, int, str]] = set()
    for t in triples:
        if t.head not in mapping or t.tail not in mapping:
            continue
        head, tail = mapping[t.head], mapping[t.tail]
        if head == tail:
            log.warning(
                "document %r: dropping self-loop triple %s after node merge",
                doc_title,
                (t.head, t.tail, t.relation),
            )
            continue
        key = (head, tail, t.relation)
        if key in seen:
            continue
        seen.add(key)
        out.append(RelationTriple(head=head, tail=tail, relation=t.relation,
                                  evidence=t.evidence))
    return tuple(out)


def merge_shared_mention_entities(doc: Document) -> Document:
    """Merge entity nodes that share an exactly matching mention surface.

    Surface comparison is case-sensitive byte equality. Merging is
    transitive: connected components under the shared-surface relation
    collapse into single nodes whose mention sets are unioned (exact
    duplicate mentions collapse). Triples are re-indexed to the merged
    nodes; duplicates and self-loops produced by merging are dropped.
    """
    n = len(doc.entities)
    uf = _UnionFind(n)
    by_surface: dict[str, int] = {}
    for ei, node in enumerate(doc.entities):
        for surface in node.surfaces:
            if surface in by_surface:
                uf.union(by_surface[surface], ei)
            else:
                by_surface[surface] = ei

    components: dict[int, list[int]] = {}
    for ei in range(n):
        components.setdefault(uf.find(ei), []).append(ei)

    new_nodes: list[EntityNode] = []
    mapping: dict[int, int] = {}
    for root in sorted(components):
        members = components[root]
        merged: dict[tuple, Mention] = {}
        for ei in members:
            for m in doc.entities[ei].mentions:
                merged.setdefault((m.sent_id, m.start, m.end, m.surface, m.etype), m)
        new_index = len(new_nodes)
        new_nodes.append(EntityNode(mentions=tuple(merged.values())))
        for ei in members:
            mapping[ei] = new_index

    return Document(
        title=doc.title,
        sents=doc.sents,
        entities=tuple(new_nodes),
        triples=_reindex_triples(doc.triples, mapping, doc.title),
    )


def resolve_overlaps(doc: Document) -> Document:
    """Discard the shorter of any two overlapping mentions in a sentence.

    Mentions are ranked by token length (longer wins), then smaller start,
    then lower node index, then mention order; a mention survives iff it
    does not overlap an already-kept higher-ranked mention. Nodes left
    without mentions are removed and their triples dropped.
    """
    ranked: list[tuple[int, int, int, int, Mention]] = []
    for ei, node in enumerate(doc.entities):
        for mi, m in enumerate(node.mentions):
            ranked.append((-(m.end - m.start), m.start, ei, mi, m))
    ranked.sort(key=lambda item: item[:4])

    kept_by_sentence: dict[int, list[Mention]] = {}
    kept_ids: set[tuple[int, int]] = set()
    for _, _, ei, mi, m in ranked:
        if any(m.overlaps(other) for other in kept_by_sentence.get(m.sent_id, [])):
            continue
        kept_by_sentence.setdefault(m.sent_id, []).append(m)
        kept_ids.add((ei, mi))

    new_nodes: list[EntityNode] = []
    mapping: dict[int, int] = {}
    for ei, node in enumerate(doc.entities):
        mentions = tuple(
            m for mi, m in enumerate(node.mentions) if (ei, mi) in kept_ids
        )
        if not mentions:
            continue
        mapping[ei] = len(new_nodes)
        new_nodes.append(EntityNode(mentions=mentions))

    return Document(
        title=doc.title,
        sents=doc.sents,
        entities=tuple(new_nodes),
        triples=_reindex_triples(doc.triples, mapping, doc.title),
    )


def clean_document(doc: Document) -> Document:
    return resolve_overlaps(merge_shared_mention_entities(doc))


def clean_corpus(corpus: CorpusFile) -> CorpusFile:
    return CorpusFile(
        path=corpus.path,
        documents=tuple(clean_document(d) for d in corpus.documents),
    )
