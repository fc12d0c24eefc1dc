"""Counterfactual corpora for document-level relation extraction.

Pipeline: clean a DocRED-style corpus, embed its entities into a candidate
pool, generate counterfactual documents by plausibility-filtered entity
replacement, then score model predictions for factual/counterfactual
consistency.
"""
from .altsearch import AltCandidate, SearchThresholds, get_alts
from .cleanup import clean_corpus, clean_document, merge_shared_mention_entities, resolve_overlaps
from .corpus_io import (
    CfDocumentRecord,
    CorpusError,
    CorpusFile,
    read_cf_corpus,
    read_corpus,
    write_cf_corpus,
    write_corpus,
)
from .embeddings import (
    CacheFileProvider,
    EmbeddingError,
    HttpProvider,
    HashProvider,
    cosine,
    make_provider,
    parse_provider_spec,
)
from .evaluate import (
    EvalReport,
    build_report,
    load_predictions,
    pairwise_consistency,
    score_prf,
)
from .generator import GenConfig, affect_r, generate, generate_corpus, replace
from .model import Document, EditStep, EntityNode, Mention, RelationTriple, validate
from .pool import CandidateEntry, Pool, build_pool, load_pool, save_pool

__version__ = "0.1.0"

__all__ = [
    "AltCandidate",
    "CacheFileProvider",
    "CandidateEntry",
    "CfDocumentRecord",
    "CorpusError",
    "CorpusFile",
    "Document",
    "EditStep",
    "EmbeddingError",
    "EntityNode",
    "EvalReport",
    "GenConfig",
    "HttpProvider",
    "Mention",
    "Pool",
    "RelationTriple",
    "SearchThresholds",
    "HashProvider",
    "affect_r",
    "build_pool",
    "build_report",
    "clean_corpus",
    "clean_document",
    "cosine",
    "generate",
    "generate_corpus",
    "get_alts",
    "load_pool",
    "load_predictions",
    "make_provider",
    "merge_shared_mention_entities",
    "pairwise_consistency",
    "parse_provider_spec",
    "read_cf_corpus",
    "read_corpus",
    "replace",
    "resolve_overlaps",
    "save_pool",
    "score_prf",
    "validate",
    "write_cf_corpus",
    "write_corpus",
]
