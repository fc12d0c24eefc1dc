"""Shared fixture builders for the test suite."""
from __future__ import annotations

import numpy as np

from cfre.corpus_io import CorpusFile
from cfre.model import Document, EntityNode, Mention, RelationTriple
from cfre.pool import CandidateEntry, Pool

# Frozen so the whole suite, including timing-bounded tests, is repeatable.
EMBED_DIM = 8
PROVIDER_SEED = 56

_VOCAB = ("aa", "bb", "cc", "dd", "ee", "ff")
_TYPES = ("PER", "ORG", "LOC")
_RELS = ("R1", "R2", "R3")


def make_parallel_doc(title: str, a: str, b: str, c: str) -> Document:
    """Three-entity document; structure identical across name triples."""
    sents = (
        tuple(f"{title} intro tokens about".split()) + (a, ",", b, "and", c, "."),
        ("later", a, "met", b, "near", c, "again"),
    )

    def node(tok: str, etype: str) -> EntityNode:
        ms = [
            Mention(sid, i, i + 1, tok, etype)
            for sid, sent in enumerate(sents)
            for i, t in enumerate(sent)
            if t == tok
        ]
        return EntityNode(tuple(ms))

    return Document(
        title=title,
        sents=sents,
        entities=(node(a, "PER"), node(b, "ORG"), node(c, "LOC")),
        triples=(
            RelationTriple(0, 1, "P108", (0,)),
            RelationTriple(0, 2, "P19", (1,)),
            RelationTriple(1, 2, "P131", (0, 1)),
        ),
    )


def parallel_corpus() -> CorpusFile:
    """Five structurally isomorphic documents with disjoint entity names."""
    names = [
        ("alice", "acme", "paris"),
        ("bob", "initech", "tokyo"),
        ("carol", "globex", "cairo"),
        ("dave", "umbrella", "oslo"),
        ("erin", "hooli", "lima"),
    ]
    return CorpusFile(
        path=None,
        documents=tuple(
            make_parallel_doc(f"doc{i}", *n) for i, n in enumerate(names)
        ),
    )


def random_messy_document(rng: np.random.Generator, title: str = "messy") -> Document:
    """Small random document that may contain overlaps and shared surfaces.

    Surfaces always equal the covered tokens, so the document passes
    structural validation; the tiny vocabulary makes exact surface
    collisions and span overlaps common.
    """
    n_sents = int(rng.integers(1, 6))
    sents = tuple(
        tuple(rng.choice(_VOCAB) for _ in range(int(rng.integers(3, 11))))
        for _ in range(n_sents)
    )
    n_entities = int(rng.integers(1, 11))
    entities = []
    for _ in range(n_entities):
        mentions = []
        for _ in range(int(rng.integers(1, 4))):
            sid = int(rng.integers(n_sents))
            length = int(rng.integers(1, 3))
            start = int(rng.integers(0, max(1, len(sents[sid]) - length + 1)))
            end = min(start + length, len(sents[sid]))
            mentions.append(
                Mention(
                    sent_id=sid,
                    start=start,
                    end=end,
                    surface=" ".join(sents[sid][start:end]),
                    etype=str(rng.choice(_TYPES)),
                )
            )
        entities.append(EntityNode(tuple(mentions)))
    triples = []
    seen_pairs = set()
    if n_entities >= 2:
        for _ in range(int(rng.integers(0, 7))):
            h, t = (int(x) for x in rng.choice(n_entities, size=2, replace=False))
            rel = str(rng.choice(_RELS))
            if (h, t, rel) in seen_pairs:
                continue
            seen_pairs.add((h, t, rel))
            evidence = tuple(
                sorted(
                    int(s)
                    for s in rng.choice(
                        n_sents, size=int(rng.integers(0, n_sents + 1)), replace=False
                    )
                )
            )
            triples.append(RelationTriple(h, t, rel, evidence))
    return Document(title, sents, tuple(entities), tuple(triples))


# --- synthetic candidate pools for search tests -----------------------------

_SURFACE_CHOICES = (
    "alpha", "beta", "gamma", "delta", "epsilon",
    "zeta", "eta", "theta", "iota", "kappa",
)
_REL_PAIRS = (
    ("R1", "head"), ("R1", "tail"), ("R2", "head"), ("R2", "tail"), ("R3", "head"),
)
_TITLE_CHOICES = ("pdoc0", "pdoc1", "pdoc2", "pdoc3")


def random_entry_features(rng: np.random.Generator, provider, title: str,
                          node_index: int) -> dict:
    """Random searchable features as a plain dict; vectors from ``provider``."""
    n_surf = int(rng.integers(1, 4))
    surfaces = [
        str(s)
        for s in rng.choice(_SURFACE_CHOICES, size=n_surf, replace=False)
    ]
    contexts = [
        f"{title} ctx {rng.integers(1000)} {s}" for s in surfaces[: int(rng.integers(1, 3))]
    ]
    rel_count = int(rng.integers(0, 4))
    rel_map = {
        tuple(_REL_PAIRS[i])
        for i in rng.choice(len(_REL_PAIRS), size=rel_count, replace=False)
    }
    types = {
        str(t) for t in rng.choice(_TYPES, size=int(rng.integers(1, 3)), replace=False)
    }
    return {
        "doc_title": title,
        "node_index": node_index,
        "types": types,
        "surfaces": surfaces,
        "mention_vecs": np.array(provider.embed_batch(surfaces)),
        "context_texts": contexts,
        "context_vecs": np.array(provider.embed_batch(contexts)),
        "rel_map": rel_map,
    }


def entry_from_features(feat: dict) -> CandidateEntry:
    return CandidateEntry(
        doc_title=feat["doc_title"],
        node_index=feat["node_index"],
        types=frozenset(feat["types"]),
        mention_surfaces=tuple(feat["surfaces"]),
        mention_vecs=np.asarray(feat["mention_vecs"], dtype=np.float64),
        context_texts=tuple(feat["context_texts"]),
        context_vecs=np.asarray(feat["context_vecs"], dtype=np.float64),
        rel_map=frozenset(feat["rel_map"]),
    )


def random_pool_features(
    rng: np.random.Generator, provider, size: int
) -> list[dict]:
    counters = {t: 0 for t in _TITLE_CHOICES}
    feats = []
    for _ in range(size):
        title = str(rng.choice(_TITLE_CHOICES))
        feats.append(random_entry_features(rng, provider, title, counters[title]))
        counters[title] += 1
    return feats


def pool_from_features(feats: list[dict], dim: int) -> Pool:
    return Pool(
        entries=tuple(entry_from_features(f) for f in feats),
        dim=dim,
        provenance={"provider_digest": "synthetic"},
    )
