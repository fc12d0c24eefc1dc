import gzip
import json

import numpy as np
import pytest

from cfre.corpus_io import (
    CfDocumentRecord,
    CorpusError,
    CorpusFile,
    CorpusParseError,
    dumps_cf_corpus,
    dumps_corpus,
    parse_corpus,
    parse_cf_corpus,
    read_cf_corpus,
    read_corpus,
    record_from_obj,
    record_to_obj,
    write_cf_corpus,
    write_corpus,
)
from cfre.model import Document, EditStep, EntityNode, Mention, RelationTriple

from helpers import make_parallel_doc, parallel_corpus, random_messy_document


def test_round_trip_preserves_documents(rng):
    docs = tuple(random_messy_document(rng, title=f"d{i}") for i in range(20))
    corpus = CorpusFile(path=None, documents=docs)
    back = parse_corpus(dumps_corpus(corpus))
    assert back.documents == docs


def test_serialization_is_deterministic(rng):
    corpus = CorpusFile(
        path=None,
        documents=tuple(random_messy_document(rng, title=f"d{i}") for i in range(5)),
    )
    assert dumps_corpus(corpus) == dumps_corpus(corpus)


def test_docred_key_layout():
    corpus = CorpusFile(path=None, documents=(make_parallel_doc("t", "a", "b", "c"),))
    obj = json.loads(dumps_corpus(corpus))[0]
    assert set(obj) == {"title", "sents", "vertexSet", "labels"}
    assert set(obj["vertexSet"][0][0]) == {"name", "sent_id", "pos", "type"}
    assert set(obj["labels"][0]) == {"h", "t", "r", "evidence"}
    m = obj["vertexSet"][0][0]
    assert m["pos"] == [4, 5] and m["name"] == "a"


def test_parse_rejects_non_array():
    with pytest.raises(CorpusError, match="array"):
        parse_corpus(b'{"title": "x"}')


def test_parse_error_carries_byte_offset():
    # multibyte char before the failure point: offset counted in bytes
    raw = '[{"title": "café", "sents": [[]], oops'.encode("utf-8")
    with pytest.raises(CorpusParseError) as err:
        parse_corpus(raw)
    assert err.value.byte_offset == raw.index(b"oops")


def test_parse_rejects_bad_utf8():
    with pytest.raises(CorpusParseError, match="not UTF-8"):
        parse_corpus(b"[\xff\xfe]")


def test_parse_names_document_and_field():
    doc = {"title": "t", "sents": [["a"]], "vertexSet": [[]], "labels": []}
    with pytest.raises(CorpusError, match=r"'t'.*vertexSet\[0\]"):
        parse_corpus(json.dumps([doc]).encode())


def test_parse_rejects_invariant_violations():
    doc = {
        "title": "t",
        "sents": [["a", "b"]],
        "vertexSet": [
            [{"name": "zzz", "sent_id": 0, "pos": [0, 1], "type": "PER"}]
        ],
        "labels": [],
    }
    with pytest.raises(CorpusError, match="violates invariants"):
        parse_corpus(json.dumps([doc]).encode())


def test_gzip_round_trip_and_mtime_pinned(tmp_path, rng):
    corpus = CorpusFile(
        path=None, documents=(random_messy_document(rng),)
    )
    p1, p2 = tmp_path / "a.json.gz", tmp_path / "b.json.gz"
    write_corpus(corpus, str(p1))
    write_corpus(corpus, str(p2))
    assert p1.read_bytes() == p2.read_bytes()  # gzip header must not embed time
    assert read_corpus(str(p1)).documents == corpus.documents
    with gzip.open(p1) as fh:
        assert json.loads(fh.read())


def sample_record(ratio: float = 0.8) -> CfDocumentRecord:
    doc = make_parallel_doc("t#cf0", "dave", "acme", "paris")
    return CfDocumentRecord(
        document=doc,
        source_title="t",
        edits=(EditStep(0, ("dave", "david"), ("dave", "dave")),),
        affected_ratio=ratio,
    )


def test_cf_record_round_trip():
    rec = sample_record()
    assert record_from_obj(record_to_obj(rec)) == rec


def test_cf_record_key_layout():
    obj = record_to_obj(sample_record())
    assert set(obj) == {
        "title", "sents", "vertexSet", "labels",
        "source_title", "edits", "affected_ratio",
    }
    assert set(obj["edits"][0]) == {
        "node_index", "replacement_entity_mentions", "per_mention_surface",
    }


def test_cf_ratio_rounded_to_six_places():
    obj = record_to_obj(sample_record(ratio=2 / 3))
    assert obj["affected_ratio"] == 0.666667


def test_cf_corpus_readable_as_plain_corpus(tmp_path):
    # downstream trainers ignore the extra keys
    path = tmp_path / "cf.json"
    write_cf_corpus([sample_record()], str(path))
    plain = read_corpus(str(path))
    assert plain.documents[0].title == "t#cf0"
    assert len(plain.documents[0].triples) == 3


def test_write_cf_corpus_enforces_ratio_floor(tmp_path):
    path = tmp_path / "cf.json"
    with pytest.raises(CorpusError, match="affected_ratio"):
        write_cf_corpus([sample_record(ratio=0.5)], str(path), tau_r=0.7)
    write_cf_corpus([sample_record(ratio=0.71)], str(path), tau_r=0.7)
    assert len(read_cf_corpus(str(path))) == 1


def test_dumps_cf_corpus_refuses_invalid_document():
    rec = sample_record()
    bad_doc = Document(
        rec.document.title,
        rec.document.sents,
        rec.document.entities,
        (RelationTriple(0, 99, "R"),),
    )
    bad = CfDocumentRecord(bad_doc, rec.source_title, rec.edits, rec.affected_ratio)
    with pytest.raises(CorpusError, match="does not validate"):
        dumps_cf_corpus([bad])


def test_parse_cf_corpus_rejects_duplicate_node_edit():
    obj = record_to_obj(sample_record())
    obj["edits"] = obj["edits"] * 2
    with pytest.raises(CorpusError, match="replaced twice"):
        parse_cf_corpus(json.dumps([obj]).encode())


def test_read_corpus_missing_file_is_corpus_error(tmp_path):
    with pytest.raises(CorpusError, match="cannot read"):
        read_corpus(str(tmp_path / "absent.json"))


def test_non_ascii_passthrough(tmp_path):
    doc = make_parallel_doc("góra", "żółw", "acme", "paris")
    path = tmp_path / "c.json"
    write_corpus(CorpusFile(path=None, documents=(doc,)), str(path))
    assert "żółw" in path.read_text(encoding="utf-8")  # no \u escapes
    assert read_corpus(str(path)).documents[0] == doc
