"""Scoring: micro precision/recall/F1 and factual/counterfactual consistency.

Consistency asks: of the gold triples a model got right on the original
documents, what fraction does it still get right on the counterfactual
versions? Entity indices are preserved by replacement, so counterpart
triples pair up by (head, tail, relation) with no string matching.
"""
from __future__ import annotations

import json
import logging
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .corpus_io import CfDocumentRecord, CorpusFile
from .model import Document

log = logging.getLogger(__name__)

# title -> set of (head_index, tail_index, relation)
PredictionSet = dict[str, set[tuple[int, int, str]]]


class EvalError(Exception):
    pass


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f1: float
    consistency: float | None  # None when no factual triple was correct
    counts: dict[str, int]

    def to_obj(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "consistency": self.consistency,
            "counts": dict(self.counts),
        }


def parse_predictions(raw: bytes | str) -> PredictionSet:
    """Parse a prediction file: JSON array of {"title", "h", "t", "r"}."""
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise EvalError(f"prediction file is not valid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise EvalError("prediction file must be a JSON array")
    preds: PredictionSet = {}
    for i, obj in enumerate(data):
        if not isinstance(obj, dict):
            raise EvalError(f"prediction [{i}] is not an object")
        try:
            title, h, t, r = obj["title"], obj["h"], obj["t"], obj["r"]
        except KeyError as exc:
            raise EvalError(f"prediction [{i}] missing key {exc}") from None
        if not isinstance(title, str):
            raise EvalError(f"prediction [{i}].title must be a string")
        if not isinstance(h, int) or isinstance(h, bool) or h < 0:
            raise EvalError(f"prediction [{i}].h must be a non-negative integer")
        if not isinstance(t, int) or isinstance(t, bool) or t < 0:
            raise EvalError(f"prediction [{i}].t must be a non-negative integer")
        if not isinstance(r, str):
            raise EvalError(f"prediction [{i}].r must be a string")
        preds.setdefault(title, set()).add((h, t, r))
    return preds


def load_predictions(path: str | Path) -> PredictionSet:
    return parse_predictions(Path(path).read_bytes())


def _gold_sets(
    gold: CorpusFile | Sequence[Document],
) -> dict[str, set[tuple[int, int, str]]]:
    docs = gold.documents if isinstance(gold, CorpusFile) else gold
    return {
        d.title: {(t.head, t.tail, t.relation) for t in d.triples} for d in docs
    }


def score_prf(
    pred: PredictionSet, gold: CorpusFile | Sequence[Document]
) -> tuple[float, float, float]:
    """Micro-averaged precision/recall/F1 over all documents.

    Predictions for titles absent from the gold corpus count as wrong.
    With zero predictions, precision is 1.0 only when gold is also empty.
    """
    gold_sets = _gold_sets(gold)
    predicted = 0
    correct = 0
    for title, triples in pred.items():
        predicted += len(triples)
        if title not in gold_sets:
            log.warning("predictions for unknown document %r score zero", title)
            continue
        correct += len(triples & gold_sets[title])
    gold_total = sum(len(s) for s in gold_sets.values())
    if predicted:
        precision = correct / predicted
    else:
        precision = 1.0 if gold_total == 0 else 0.0
    if gold_total:
        recall = correct / gold_total
    else:
        recall = 1.0 if predicted == 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def consistency_counts(
    factual_pred: PredictionSet,
    cf_pred: PredictionSet,
    cf_records: Sequence[CfDocumentRecord],
    factual_gold: CorpusFile | Sequence[Document],
    *,
    edited_only: bool = False,
) -> tuple[int, int]:
    """(correct-on-factual, of those also correct-on-counterfactual).

    A pair enters the conditioning set when the counterfactual document's
    gold triple is also gold in the source document and the factual
    predictions contain it. ``edited_only`` restricts to triples whose head
    or tail node was replaced.
    """
    gold_sets = _gold_sets(factual_gold)
    factual_correct = 0
    still_correct = 0
    empty: frozenset[tuple[int, int, str]] = frozenset()
    for rec in cf_records:
        if rec.source_title not in gold_sets:
            raise EvalError(
                f"counterfactual {rec.document.title!r}: source document "
                f"{rec.source_title!r} not in the gold corpus"
            )
        src_gold = gold_sets[rec.source_title]
        fact = factual_pred.get(rec.source_title, empty)
        cf = cf_pred.get(rec.document.title, empty)
        edited = {step.node_index for step in rec.edits}
        for t in rec.document.triples:
            if edited_only and t.head not in edited and t.tail not in edited:
                continue
            key = (t.head, t.tail, t.relation)
            if key in src_gold and key in fact:
                factual_correct += 1
                if key in cf:
                    still_correct += 1
    return factual_correct, still_correct


def pairwise_consistency(
    factual_pred: PredictionSet,
    cf_pred: PredictionSet,
    cf_records: Sequence[CfDocumentRecord],
    factual_gold: CorpusFile | Sequence[Document],
    *,
    edited_only: bool = False,
) -> float | None:
    """Fraction of factually-correct gold triples kept on counterfactuals.

    Returns None (not 0.0) when the model predicted no factual gold triple
    of any counterfactual's source correctly: the ratio has no denominator.
    """
    factual_correct, still_correct = consistency_counts(
        factual_pred, cf_pred, cf_records, factual_gold, edited_only=edited_only
    )
    if factual_correct == 0:
        return None
    return still_correct / factual_correct


def build_report(
    factual_pred: PredictionSet,
    gold: CorpusFile | Sequence[Document],
    cf_pred: PredictionSet,
    cf_records: Sequence[CfDocumentRecord],
    *,
    edited_only: bool = False,
) -> EvalReport:
    precision, recall, f1 = score_prf(factual_pred, gold)
    factual_correct, still_correct = consistency_counts(
        factual_pred, cf_pred, cf_records, gold, edited_only=edited_only
    )
    gold_sets = _gold_sets(gold)
    predicted = sum(len(s) for s in factual_pred.values())
    correct = sum(
        len(s & gold_sets[title])
        for title, s in factual_pred.items()
        if title in gold_sets
    )
    return EvalReport(
        precision=precision,
        recall=recall,
        f1=f1,
        consistency=(still_correct / factual_correct) if factual_correct else None,
        counts={
            "gold": sum(len(s) for s in gold_sets.values()),
            "predicted": predicted,
            "correct": correct,
            "factual_correct": factual_correct,
            "cf_correct_given_factual": still_correct,
        },
    )


def median_consistency(values: Sequence[float | None]) -> float | None:
    """Median over the defined per-run values; None if every run is undefined."""
    defined = [v for v in values if v is not None]
    if not defined:
        return None
    return float(statistics.median(defined))


def _fmt(value: float | None) -> str:
    return "undef" if value is None else f"{value:.4f}"


def format_report_table(rows: Sequence[tuple[str, EvalReport]]) -> str:
    """Aligned plain-text table, one row per labelled report."""
    header = ("run", "PRC", "REC", "F1", "CONS")
    body = [
        (label, _fmt(r.precision), _fmt(r.recall), _fmt(r.f1), _fmt(r.consistency))
        for label, r in rows
    ]
    widths = [
        max(len(header[c]), *(len(row[c]) for row in body)) if body else len(header[c])
        for c in range(len(header))
    ]
    lines = [
        "  ".join(h.ljust(widths[c]) for c, h in enumerate(header)).rstrip()
    ]
    for row in body:
        lines.append(
            "  ".join(cell.ljust(widths[c]) for c, cell in enumerate(row)).rstrip()
        )
    return "\n".join(lines)
