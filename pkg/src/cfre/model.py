"""Core domain types for document-level relation extraction corpora.

Documents follow the DocRED structure: a title, tokenized sentences, entity
nodes (each a set of mentions), and relation triples between entity nodes.
All types are immutable value objects and safe to share across threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence


@dataclass(frozen=True)
class Mention:
    """One contiguous token span in one sentence referring to an entity.

    The span is the half-open token interval [start, end) within sentence
    ``sent_id``. ``surface`` must equal the space-join of the covered tokens.
    """

    sent_id: int
    start: int
    end: int
    surface: str
    etype: str

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)

    def overlaps(self, other: "Mention") -> bool:
        """True when both mentions share at least one token position."""
        return (
            self.sent_id == other.sent_id
            and self.start < other.end
            and other.start < self.end
        )


@dataclass(frozen=True)
class EntityNode:
    """All mentions in one document that refer to the same entity."""

    mentions: tuple[Mention, ...]

    @property
    def types(self) -> frozenset[str]:
        """Entity type label set, the union over this node's mentions."""
        return frozenset(m.etype for m in self.mentions)

    @property
    def surfaces(self) -> tuple[str, ...]:
        """Distinct mention surface strings in first-occurrence order."""
        seen: dict[str, None] = {}
        for m in self.mentions:
            seen.setdefault(m.surface, None)
        return tuple(seen)


@dataclass(frozen=True)
class RelationTriple:
    """Directed relation between two entity nodes, by node index."""

    head: int
    tail: int
    relation: str
    evidence: tuple[int, ...] = ()

    @property
    def key(self) -> tuple[int, int, str]:
        return (self.head, self.tail, self.relation)


@dataclass(frozen=True)
class Document:
    title: str
    sents: tuple[tuple[str, ...], ...]
    entities: tuple[EntityNode, ...]
    triples: tuple[RelationTriple, ...]


@dataclass(frozen=True)
class EditStep:
    """Record of one node replacement.

    ``surfaces`` is the full mention-surface set of the chosen alternative
    (in its stored order); ``per_mention`` gives the surface actually applied
    to each of the node's mentions, aligned with the node's mention order.
    """

    node_index: int
    surfaces: tuple[str, ...]
    per_mention: tuple[str, ...]


# Ordered record of every replacement applied to one counterfactual document.
EditTuple = tuple[EditStep, ...]


def validate(doc: Document) -> list[str]:
    """Check every structural invariant of ``doc``.

    Returns an empty list when the document is well-formed; otherwise one
    human-readable violation per problem, each naming the offending field
    by index path. Pure and total: never raises on bad data.
    """
    violations: list[str] = []
    n_sents = len(doc.sents)
    n_entities = len(doc.entities)

    for ei, node in enumerate(doc.entities):
        if not node.mentions:
            violations.append(f"entities[{ei}]: node has no mentions")
        for mi, m in enumerate(node.mentions):
            where = f"entities[{ei}].mentions[{mi}]"
            if not 0 <= m.sent_id < n_sents:
                violations.append(
                    f"{where}.sent_id: {m.sent_id} out of range for {n_sents} sentences"
                )
                continue
            sent = doc.sents[m.sent_id]
            if not (0 <= m.start < m.end <= len(sent)):
                violations.append(
                    f"{where}.span: [{m.start}, {m.end}) invalid for sentence "
                    f"of length {len(sent)}"
                )
                continue
            covered = " ".join(sent[m.start : m.end])
            if m.surface != covered:
                violations.append(
                    f"{where}.surface: {m.surface!r} != covered tokens {covered!r}"
                )

    for ti, t in enumerate(doc.triples):
        where = f"triples[{ti}]"
        if not 0 <= t.head < n_entities:
            violations.append(f"{where}.head: index {t.head} out of range")
        if not 0 <= t.tail < n_entities:
            violations.append(f"{where}.tail: index {t.tail} out of range")
        if t.head == t.tail:
            violations.append(f"{where}: head == tail ({t.head})")
        for vi, sid in enumerate(t.evidence):
            if not 0 <= sid < n_sents:
                violations.append(
                    f"{where}.evidence[{vi}]: sentence index {sid} out of range"
                )

    return violations


def validate_edit_tuple(edits: Sequence[EditStep]) -> list[str]:
    """Check that no node index is replaced more than once."""
    violations = []
    seen: set[int] = set()
    for i, step in enumerate(edits):
        if step.node_index in seen:
            violations.append(f"edits[{i}]: node {step.node_index} replaced twice")
        seen.add(step.node_index)
        if len(step.per_mention) and not set(step.per_mention) <= set(step.surfaces):
            violations.append(
                f"edits[{i}]: per-mention surfaces not drawn from the surface set"
            )
    return violations


def flat_tokens(doc: Document) -> list[str]:
    """All document tokens in reading order, sentence boundaries dropped."""
    out: list[str] = []
    for sent in doc.sents:
        out.extend(sent)
    return out


def sentence_offsets(doc: Document) -> list[int]:
    """Start offset of each sentence within the flattened token sequence."""
    offsets = []
    pos = 0
    for sent in doc.sents:
        offsets.append(pos)
        pos += len(sent)
    return offsets
