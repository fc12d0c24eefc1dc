"""Read and write DocRED-style corpora and counterfactual output corpora.

Input files are JSON arrays of documents with ``title``, ``sents``,
``vertexSet`` and ``labels`` keys. Counterfactual corpora use the same
schema extended with ``source_title``, ``edits`` and ``affected_ratio``
per document, so downstream trainers can consume them unchanged by
ignoring the extra keys. Serialization is deterministic: stable key
order and ratio values rounded to 6 decimal places.
"""
from __future__ import annotations

import gzip
import json
from dataclasses import dataclass
from typing import Any, Sequence

from .model import (
    Document,
    EditStep,
    EditTuple,
    EntityNode,
    Mention,
    RelationTriple,
    validate,
    validate_edit_tuple,
)

COMPRESSION_SUFFIXES = (".gz", ".gzip")


class CorpusError(Exception):
    """Malformed corpus content or a broken document contract."""


class CorpusParseError(CorpusError):
    """Input is not valid JSON; carries the byte offset of the failure."""

    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} (byte offset {byte_offset})")
        self.byte_offset = byte_offset


@dataclass(frozen=True)
class CorpusFile:
    path: str | None
    documents: tuple[Document, ...]


@dataclass(frozen=True)
class CfDocumentRecord:
    """One counterfactual document plus its edit provenance."""

    document: Document
    source_title: str
    edits: EditTuple
    affected_ratio: float


def _require(cond: bool, title: str, field: str) -> None:
    if not cond:
        raise CorpusError(f"document {title!r}: bad or missing field {field}")


def _document_from_obj(obj: Any) -> Document:
    if not isinstance(obj, dict):
        raise CorpusError(f"document entry is not an object: {type(obj).__name__}")
    title = obj.get("title")
    _require(isinstance(title, str), str(title), "title")
    sents_raw = obj.get("sents")
    _require(isinstance(sents_raw, list), title, "sents")
    sents = []
    for si, sent in enumerate(sents_raw):
        _require(
            isinstance(sent, list) and all(isinstance(t, str) for t in sent),
            title,
            f"sents[{si}]",
        )
        sents.append(tuple(sent))

    vertex_set = obj.get("vertexSet")
    _require(isinstance(vertex_set, list), title, "vertexSet")
    entities = []
    for vi, mentions_raw in enumerate(vertex_set):
        _require(
            isinstance(mentions_raw, list) and len(mentions_raw) > 0,
            title,
            f"vertexSet[{vi}]",
        )
        mentions = []
        for mi, m in enumerate(mentions_raw):
            where = f"vertexSet[{vi}][{mi}]"
            _require(isinstance(m, dict), title, where)
            pos = m.get("pos")
            _require(
                isinstance(pos, list) and len(pos) == 2
                and all(isinstance(p, int) for p in pos),
                title,
                f"{where}.pos",
            )
            _require(isinstance(m.get("sent_id"), int), title, f"{where}.sent_id")
            _require(isinstance(m.get("name"), str), title, f"{where}.name")
            _require(isinstance(m.get("type"), str), title, f"{where}.type")
            mentions.append(
                Mention(
                    sent_id=m["sent_id"],
                    start=pos[0],
                    end=pos[1],
                    surface=m["name"],
                    etype=m["type"],
                )
            )
        entities.append(EntityNode(mentions=tuple(mentions)))

    labels = obj.get("labels", [])
    _require(isinstance(labels, list), title, "labels")
    triples = []
    for li, lab in enumerate(labels):
        where = f"labels[{li}]"
        _require(isinstance(lab, dict), title, where)
        _require(isinstance(lab.get("h"), int), title, f"{where}.h")
        _require(isinstance(lab.get("t"), int), title, f"{where}.t")
        _require(isinstance(lab.get("r"), str), title, f"{where}.r")
        evidence = lab.get("evidence", [])
        _require(
            isinstance(evidence, list) and all(isinstance(e, int) for e in evidence),
            title,
            f"{where}.evidence",
        )
        triples.append(
            RelationTriple(
                head=lab["h"], tail=lab["t"], relation=lab["r"],
                evidence=tuple(evidence),
            )
        )

    doc = Document(
        title=title,
        sents=tuple(sents),
        entities=tuple(entities),
        triples=tuple(triples),
    )
    problems = validate(doc)
    if problems:
        raise CorpusError(
            f"document {title!r} violates invariants: " + "; ".join(problems)
        )
    return doc


def _document_to_obj(doc: Document) -> dict[str, Any]:
    return {
        "title": doc.title,
        "sents": [list(s) for s in doc.sents],
        "vertexSet": [
            [
                {
                    "name": m.surface,
                    "sent_id": m.sent_id,
                    "pos": [m.start, m.end],
                    "type": m.etype,
                }
                for m in node.mentions
            ]
            for node in doc.entities
        ],
        "labels": [
            {
                "h": t.head,
                "t": t.tail,
                "r": t.relation,
                "evidence": list(t.evidence),
            }
            for t in doc.triples
        ],
    }


def parse_corpus(raw: bytes, path: str | None = None) -> CorpusFile:
    """Parse a DocRED-schema JSON corpus from raw bytes.

    Every parsed document is validated; the first invariant violation
    aborts the parse with an error naming the document and field.
    """
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorpusParseError(f"not UTF-8: {exc.reason}", exc.start) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        byte_offset = len(text[: exc.pos].encode("utf-8"))
        raise CorpusParseError(exc.msg, byte_offset) from exc
    if not isinstance(data, list):
        raise CorpusError("corpus root must be a JSON array of documents")
    documents = tuple(_document_from_obj(obj) for obj in data)
    return CorpusFile(path=path, documents=documents)


def _open_for_read(path: str):
    if str(path).endswith(COMPRESSION_SUFFIXES):
        return gzip.open(path, "rb")
    return open(path, "rb")


def _write_bytes(path: str, payload: bytes) -> None:
    try:
        if str(path).endswith(COMPRESSION_SUFFIXES):
            # mtime and filename pinned so identical payloads stay byte-identical
            with open(path, "wb") as fh:
                with gzip.GzipFile(fileobj=fh, filename="", mode="wb", mtime=0) as gz:
                    gz.write(payload)
        else:
            with open(path, "wb") as fh:
                fh.write(payload)
    except OSError as exc:
        raise CorpusError(f"cannot write {path}: {exc}") from exc


def read_corpus(path: str) -> CorpusFile:
    try:
        with _open_for_read(path) as fh:
            raw = fh.read()
    except OSError as exc:
        raise CorpusError(f"cannot read {path}: {exc}") from exc
    return parse_corpus(raw, path=str(path))


def dumps_corpus(corpus: CorpusFile) -> bytes:
    docs = [_document_to_obj(d) for d in corpus.documents]
    return (json.dumps(docs, ensure_ascii=False, separators=(",", ":")) + "\n").encode(
        "utf-8"
    )


def write_corpus(corpus: CorpusFile, path: str) -> None:
    _write_bytes(path, dumps_corpus(corpus))


def _edit_to_obj(step: EditStep) -> dict[str, Any]:
    return {
        "node_index": step.node_index,
        "replacement_entity_mentions": list(step.surfaces),
        "per_mention_surface": list(step.per_mention),
    }


def _edit_from_obj(obj: Any, title: str) -> EditStep:
    _require(isinstance(obj, dict), title, "edits[]")
    _require(isinstance(obj.get("node_index"), int), title, "edits[].node_index")
    surfaces = obj.get("replacement_entity_mentions")
    per_mention = obj.get("per_mention_surface")
    for name, val in (
        ("replacement_entity_mentions", surfaces),
        ("per_mention_surface", per_mention),
    ):
        _require(
            isinstance(val, list) and all(isinstance(s, str) for s in val),
            title,
            f"edits[].{name}",
        )
    return EditStep(
        node_index=obj["node_index"],
        surfaces=tuple(surfaces),
        per_mention=tuple(per_mention),
    )


def record_to_obj(rec: CfDocumentRecord) -> dict[str, Any]:
    obj = _document_to_obj(rec.document)
    obj["source_title"] = rec.source_title
    obj["edits"] = [_edit_to_obj(e) for e in rec.edits]
    obj["affected_ratio"] = round(rec.affected_ratio, 6)
    return obj


def record_from_obj(obj: Any) -> CfDocumentRecord:
    doc = _document_from_obj(obj)
    _require(isinstance(obj.get("source_title"), str), doc.title, "source_title")
    _require(isinstance(obj.get("edits"), list), doc.title, "edits")
    ratio = obj.get("affected_ratio")
    _require(isinstance(ratio, (int, float)), doc.title, "affected_ratio")
    edits = tuple(_edit_from_obj(e, doc.title) for e in obj["edits"])
    problems = validate_edit_tuple(edits)
    if problems:
        raise CorpusError(f"document {doc.title!r}: " + "; ".join(problems))
    return CfDocumentRecord(
        document=doc,
        source_title=obj["source_title"],
        edits=edits,
        affected_ratio=float(ratio),
    )


def dumps_cf_corpus(
    records: Sequence[CfDocumentRecord], *, tau_r: float | None = None
) -> bytes:
    """Serialize counterfactual records, enforcing the record contract.

    When ``tau_r`` is given, every record's affected ratio must be strictly
    above it; violating records are refused rather than written.
    """
    objs = []
    for i, rec in enumerate(records):
        problems = validate(rec.document)
        if problems:
            raise CorpusError(
                f"record {i} ({rec.document.title!r}) does not validate: "
                + "; ".join(problems)
            )
        if tau_r is not None and not rec.affected_ratio > tau_r:
            raise CorpusError(
                f"record {i} ({rec.document.title!r}): affected_ratio "
                f"{rec.affected_ratio} is not > {tau_r}"
            )
        objs.append(record_to_obj(rec))
    return (json.dumps(objs, ensure_ascii=False, separators=(",", ":")) + "\n").encode(
        "utf-8"
    )


def write_cf_corpus(
    records: Sequence[CfDocumentRecord], path: str, *, tau_r: float | None = None
) -> None:
    _write_bytes(path, dumps_cf_corpus(records, tau_r=tau_r))


def parse_cf_corpus(raw: bytes, path: str | None = None) -> list[CfDocumentRecord]:
    try:
        data = json.loads(raw.decode("utf-8"))
    except json.JSONDecodeError as exc:
        byte_offset = len(raw.decode("utf-8", "replace")[: exc.pos].encode("utf-8"))
        raise CorpusParseError(exc.msg, byte_offset) from exc
    if not isinstance(data, list):
        raise CorpusError("counterfactual corpus root must be a JSON array")
    return [record_from_obj(obj) for obj in data]


def read_cf_corpus(path: str) -> list[CfDocumentRecord]:
    try:
        with _open_for_read(path) as fh:
            raw = fh.read()
    except OSError as exc:
        raise CorpusError(f"cannot read {path}: {exc}") from exc
    return parse_cf_corpus(raw, path=str(path))
