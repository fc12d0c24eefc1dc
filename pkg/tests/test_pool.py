import numpy as np
import pytest

from cfre.corpus_io import CorpusFile
from cfre.embeddings import HashProvider
from cfre.model import Document, EntityNode, Mention, RelationTriple
from cfre.pool import (
    CandidateEntry,
    Pool,
    PoolError,
    build_pool,
    collect_embedding_texts,
    context_snippet,
    load_pool,
    node_embedding_texts,
    relation_map,
    save_pool,
)

import helpers


def entries_equal(a: CandidateEntry, b: CandidateEntry) -> bool:
    return (
        a.doc_title == b.doc_title
        and a.node_index == b.node_index
        and a.types == b.types
        and a.mention_surfaces == b.mention_surfaces
        and a.context_texts == b.context_texts
        and a.rel_map == b.rel_map
        and np.allclose(a.mention_vecs, b.mention_vecs, atol=1e-12)
        and np.allclose(a.context_vecs, b.context_vecs, atol=1e-12)
    )


# --- relation_map --------------------------------------------------------------


def rel_doc(triples) -> Document:
    sents = (("a", "b", "c", "d"),)
    entities = tuple(
        EntityNode((Mention(0, i, i + 1, s, "T"),))
        for i, s in enumerate(["a", "b", "c", "d"])
    )
    return Document("rel", sents, entities, tuple(RelationTriple(*t) for t in triples))


def test_relation_map_head_and_tail_roles():
    doc = rel_doc([(0, 1, "country"), (2, 0, "located_in"), (0, 2, "country")])
    assert relation_map(doc, 0) == frozenset(
        {("country", "head"), ("located_in", "tail")}
    )
    assert relation_map(doc, 1) == frozenset({("country", "tail")})
    assert relation_map(doc, 3) == frozenset()


def test_relation_map_triple_order_invariant():
    a = rel_doc([(0, 1, "R1"), (2, 3, "R2"), (1, 2, "R3")])
    b = rel_doc([(1, 2, "R3"), (0, 1, "R1"), (2, 3, "R2")])
    for i in range(4):
        assert relation_map(a, i) == relation_map(b, i)


def test_relation_map_bad_index():
    doc = rel_doc([])
    with pytest.raises(PoolError, match="out of range"):
        relation_map(doc, 4)
    with pytest.raises(PoolError, match="out of range"):
        relation_map(doc, -1)


# --- context_snippet -------------------------------------------------------------


def test_snippet_sixteen_each_side():
    tokens = tuple(f"t{i}" for i in range(50))
    doc = Document(
        "long",
        (tokens,),
        (EntityNode((Mention(0, 20, 21, "t20", "T"),)),),
        (),
    )
    snippet = context_snippet(doc, doc.entities[0].mentions[0])
    assert snippet == " ".join(tokens[4:37])


def test_snippet_clipped_at_document_start_and_end():
    tokens = tuple(f"t{i}" for i in range(10))
    doc = Document(
        "short",
        (tokens,),
        (
            EntityNode((Mention(0, 1, 2, "t1", "T"),)),
            EntityNode((Mention(0, 9, 10, "t9", "T"),)),
        ),
        (),
    )
    assert context_snippet(doc, doc.entities[0].mentions[0]) == " ".join(tokens)
    assert context_snippet(doc, doc.entities[1].mentions[0]) == " ".join(tokens)


def test_snippet_crosses_sentence_boundary():
    sents = (tuple(f"a{i}" for i in range(20)), tuple(f"b{i}" for i in range(5)))
    doc = Document(
        "two",
        sents,
        (EntityNode((Mention(1, 0, 1, "b0", "T"),)),),
        (),
    )
    snippet = context_snippet(doc, doc.entities[0].mentions[0])
    flat = list(sents[0]) + list(sents[1])
    # mention sits at flat offset 20; the window reaches back into sentence 0
    assert snippet == " ".join(flat[4:25])
    assert "a4" in snippet and "b4" in snippet


def test_snippet_window_parameter():
    tokens = tuple(f"t{i}" for i in range(9))
    doc = Document(
        "w", (tokens,), (EntityNode((Mention(0, 4, 5, "t4", "T"),)),), ()
    )
    assert context_snippet(doc, doc.entities[0].mentions[0], window=1) == "t3 t4 t5"
    assert context_snippet(doc, doc.entities[0].mentions[0], window=0) == "t4"


# --- embedding text collection ------------------------------------------------------


def test_node_embedding_texts_dedupes_surfaces_keeps_all_snippets():
    sents = (("x", "met", "x", "and", "y"),)
    node = EntityNode(
        (
            Mention(0, 0, 1, "x", "PER"),
            Mention(0, 2, 3, "x", "PER"),
        )
    )
    other = EntityNode((Mention(0, 4, 5, "y", "PER"),))
    doc = Document("d", sents, (node, other), ())
    surfaces, snippets = node_embedding_texts(doc, 0)
    assert surfaces == ["x"]
    assert len(snippets) == 2
    assert snippets[0] == " ".join(sents[0])


def test_collect_embedding_texts_order_and_dedup():
    corpus = helpers.parallel_corpus()
    texts = collect_embedding_texts(corpus)
    assert len(texts) == len(set(texts))
    doc0 = corpus.documents[0]
    s0, snip0 = node_embedding_texts(doc0, 0)
    # first node's surface leads, its snippet follows somewhere after
    assert texts[0] == s0[0]
    assert all(t in texts for t in snip0)
    # every text any node needs is present
    for doc in corpus.documents:
        for ni in range(len(doc.entities)):
            ss, sn = node_embedding_texts(doc, ni)
            for t in ss + sn:
                assert t in texts


# --- build_pool -------------------------------------------------------------------


@pytest.fixture(scope="module")
def provider():
    return HashProvider(dim=helpers.EMBED_DIM, seed=helpers.PROVIDER_SEED)


@pytest.fixture(scope="module")
def built(provider):
    return build_pool(helpers.parallel_corpus(), provider)


def test_build_pool_one_entry_per_node(built):
    corpus = helpers.parallel_corpus()
    expected = sum(len(d.entities) for d in corpus.documents)
    assert len(built.entries) == expected == 15
    keys = {(e.doc_title, e.node_index) for e in built.entries}
    assert len(keys) == expected


def test_build_pool_entry_features_match_source(built, provider):
    corpus = helpers.parallel_corpus()
    doc = corpus.documents[0]
    entry = built.entry_for(doc.title, 0)
    node = doc.entities[0]
    assert entry.types == node.types
    assert entry.mention_surfaces == node.surfaces
    assert entry.rel_map == relation_map(doc, 0)
    surfaces, snippets = node_embedding_texts(doc, 0)
    assert list(entry.context_texts) == snippets
    want = provider.embed_batch(surfaces)
    assert np.allclose(entry.mention_vecs, np.array(want), atol=1e-12)


def test_build_pool_dim_and_provenance(built, provider):
    assert built.dim == helpers.EMBED_DIM
    assert built.provenance["provider_digest"] == provider.digest
    assert "corpus" in built.provenance


def test_build_pool_deterministic(provider):
    a = build_pool(helpers.parallel_corpus(), provider)
    b = build_pool(helpers.parallel_corpus(), provider)
    assert len(a.entries) == len(b.entries)
    for ea, eb in zip(a.entries, b.entries):
        assert entries_equal(ea, eb)


def test_build_pool_empty_corpus_refused(provider):
    empty = CorpusFile(path=None, documents=())
    with pytest.raises(PoolError, match="no entities"):
        build_pool(empty, provider)


# --- Pool container ---------------------------------------------------------------


def test_entry_for_miss_names_key(built):
    with pytest.raises(PoolError, match="'nope'#7"):
        built.entry_for("nope", 7)


def test_duplicate_entry_rejected(rng, provider):
    feat = helpers.random_entry_features(rng, provider, "t", 0)
    e1 = helpers.entry_from_features(feat)
    e2 = helpers.entry_from_features(feat)
    with pytest.raises(PoolError, match="duplicate"):
        Pool(entries=(e1, e2), dim=helpers.EMBED_DIM, provenance={})


def test_dim_mismatch_rejected(rng, provider):
    feat = helpers.random_entry_features(rng, provider, "t", 0)
    entry = helpers.entry_from_features(feat)
    with pytest.raises(PoolError, match="dim"):
        Pool(entries=(entry,), dim=helpers.EMBED_DIM + 1, provenance={})


def test_packed_segments_align_with_entries(built):
    pm = built.packed_mentions()
    pc = built.packed_contexts()
    for packed, field in ((pm, "mention_vecs"), (pc, "context_vecs")):
        assert packed.starts.shape == packed.ends.shape == (len(built.entries),)
        total = sum(getattr(e, field).shape[0] for e in built.entries)
        assert packed.matrix.shape == (total, built.dim)
        assert np.allclose(np.linalg.norm(packed.matrix, axis=1), 1.0, atol=1e-12)
        for i, e in enumerate(built.entries):
            seg = packed.matrix[packed.starts[i] : packed.ends[i]]
            raw = getattr(e, field)
            norm = raw / np.linalg.norm(raw, axis=1)[:, None]
            assert np.allclose(seg, norm, atol=1e-12)


def test_entry_validation():
    vec = np.ones((1, 4))
    with pytest.raises(PoolError, match="no mentions"):
        CandidateEntry(
            doc_title="d", node_index=0, types=frozenset({"T"}),
            mention_surfaces=(), mention_vecs=np.zeros((0, 4)),
            context_texts=("c",), context_vecs=vec, rel_map=frozenset(),
        )
    with pytest.raises(PoolError, match="mention vector count"):
        CandidateEntry(
            doc_title="d", node_index=0, types=frozenset({"T"}),
            mention_surfaces=("a", "b"), mention_vecs=vec,
            context_texts=("c",), context_vecs=vec, rel_map=frozenset(),
        )
    with pytest.raises(PoolError, match="context vector count"):
        CandidateEntry(
            doc_title="d", node_index=0, types=frozenset({"T"}),
            mention_surfaces=("a",), mention_vecs=vec,
            context_texts=("c", "d"), context_vecs=vec, rel_map=frozenset(),
        )


# --- persistence -----------------------------------------------------------------


def test_save_load_round_trip(built, tmp_path):
    path = str(tmp_path / "pool.jsonl")
    save_pool(built, path)
    loaded = load_pool(path)
    assert loaded.dim == built.dim
    assert loaded.provenance == built.provenance
    assert len(loaded.entries) == len(built.entries)
    for a, b in zip(built.entries, loaded.entries):
        assert entries_equal(a, b)


def test_load_pool_checks_provider_digest(built, tmp_path, provider):
    path = str(tmp_path / "pool.jsonl")
    save_pool(built, path)
    load_pool(path, expected_provider_digest=provider.digest)
    with pytest.raises(PoolError, match="provider digest"):
        load_pool(path, expected_provider_digest="sha256:other")
    forced = load_pool(path, expected_provider_digest="sha256:other", force=True)
    assert len(forced.entries) == len(built.entries)


def test_load_pool_bad_inputs(tmp_path):
    missing = str(tmp_path / "missing.jsonl")
    with pytest.raises(PoolError, match="cannot read"):
        load_pool(missing)

    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    with pytest.raises(PoolError, match="is empty"):
        load_pool(str(empty))

    bad_header = tmp_path / "hdr.jsonl"
    bad_header.write_text('{"nope": 1}\n')
    with pytest.raises(PoolError, match="bad header"):
        load_pool(str(bad_header))

    bad_line = tmp_path / "line.jsonl"
    bad_line.write_text('{"dim": 4, "provenance": {}}\n{broken\n')
    with pytest.raises(PoolError, match="line 2: bad JSON"):
        load_pool(str(bad_line))

    malformed = tmp_path / "ent.jsonl"
    malformed.write_text('{"dim": 4, "provenance": {}}\n{"doc_title": "x"}\n')
    with pytest.raises(PoolError, match="line 2: malformed"):
        load_pool(str(malformed))


def test_save_load_random_pools(rng, provider, tmp_path):
    for k in range(5):
        feats = helpers.random_pool_features(rng, provider, size=6)
        pool = helpers.pool_from_features(feats, helpers.EMBED_DIM)
        path = str(tmp_path / f"p{k}.jsonl")
        save_pool(pool, path)
        loaded = load_pool(path)
        for a, b in zip(pool.entries, loaded.entries):
            assert entries_equal(a, b)
