"""Command line for the counterfactual corpus pipeline.

Subcommands: clean, pool, generate, evaluate, stats. Exit codes: 0 on
success, 1 on data or contract errors, 2 on usage errors. Data goes to
stdout or the named output files; progress and errors go to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .altsearch import SearchThresholds
from .cleanup import clean_corpus
from .corpus_io import (
    CorpusError,
    read_cf_corpus,
    read_corpus,
    write_cf_corpus,
    write_corpus,
)
from .embeddings import (
    EmbeddingError,
    HttpProvider,
    make_provider,
    parse_provider_spec,
)
from .evaluate import (
    EvalError,
    build_report,
    format_report_table,
    load_predictions,
    median_consistency,
)
from .generator import DEFAULT_MAX_DOCS, GenConfig, GeneratorError, generate_corpus
from .kernels import active_backend
from .pool import PoolError, build_pool, collect_embedding_texts, load_pool, save_pool

log = logging.getLogger("cfre")

_DATA_ERRORS = (CorpusError, PoolError, EmbeddingError, GeneratorError, EvalError)


class _UsageError(Exception):
    """Bad flag values caught after argparse (e.g. threshold ordering)."""


def _cmd_clean(args: argparse.Namespace) -> int:
    corpus = read_corpus(args.input)
    cleaned = clean_corpus(corpus)
    write_corpus(cleaned, args.output)
    before = sum(len(d.entities) for d in corpus.documents)
    after = sum(len(d.entities) for d in cleaned.documents)
    log.info(
        "cleaned %d documents: %d entity nodes -> %d, wrote %s",
        len(cleaned.documents), before, after, args.output,
    )
    return 0


def _cmd_pool(args: argparse.Namespace) -> int:
    corpus = read_corpus(args.input)
    if args.write_manifest:
        texts = collect_embedding_texts(corpus)
        for text in texts:
            if "\n" in text:
                raise PoolError(
                    f"manifest text contains a newline and cannot be written "
                    f"line-based: {text!r}"
                )
        Path(args.write_manifest).write_text(
            "".join(t + "\n" for t in texts), encoding="utf-8"
        )
        log.info("wrote %d manifest lines to %s", len(texts), args.write_manifest)
        if args.output is None:
            return 0
    if args.output is None:
        raise PoolError("pool: either --output or --write-manifest is required")
    config = parse_provider_spec(args.provider)
    provider = make_provider(config)
    if isinstance(provider, HttpProvider) and not provider.health():
        raise EmbeddingError(f"embedding service at {config.location} is not healthy")
    pool = build_pool(corpus, provider)
    pool.provenance["provider"] = args.provider
    save_pool(pool, args.output)
    log.info(
        "pooled %d entries (dim %d) from %d documents into %s",
        len(pool.entries), pool.dim, len(corpus.documents), args.output,
    )
    return 0


def _search_thresholds(args: argparse.Namespace) -> SearchThresholds:
    return SearchThresholds(
        tau_e_max=args.tau_e_max, tau_e_min=args.tau_e_min, tau_c=args.tau_c
    )


def _cmd_generate(args: argparse.Namespace) -> int:
    try:
        cfg = GenConfig(
            tau_r=args.tau_r,
            m_n=args.m_n,
            search=_search_thresholds(args),
            seed=args.seed,
            max_docs=args.max_docs,
            runs=args.runs,
        )
    except (ValueError, GeneratorError) as exc:
        raise _UsageError(str(exc)) from None
    corpus = read_corpus(args.input)
    pool = load_pool(args.pool)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    runs = generate_corpus(corpus, pool, cfg, workers=args.workers)
    outputs = []
    for k, records in enumerate(runs):
        path = out_dir / f"cf_run{k}.json"
        write_cf_corpus(records, str(path), tau_r=cfg.tau_r)
        outputs.append(path.name)
        log.info("run %d: %d counterfactual documents -> %s", k, len(records), path)
    resolved = {
        "input": str(args.input),
        "pool": str(args.pool),
        "provider_digest": pool.provenance.get("provider_digest"),
        "tau_e_max": cfg.search.tau_e_max,
        "tau_e_min": cfg.search.tau_e_min,
        "tau_c": cfg.search.tau_c,
        "m_n": cfg.m_n,
        "tau_r": cfg.tau_r,
        "seed": cfg.seed,
        "max_docs": cfg.max_docs,
        "runs": cfg.runs,
        "workers": args.workers,
        "kernel_backend": active_backend(),
        "outputs": outputs,
    }
    (out_dir / "run_config.json").write_text(
        json.dumps(resolved, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    if len(args.cf_corpus) != len(args.cf_pred):
        raise EvalError(
            f"{len(args.cf_corpus)} --cf-corpus files but "
            f"{len(args.cf_pred)} --cf-pred files"
        )
    gold = read_corpus(args.gold)
    factual_pred = load_predictions(args.factual_pred)
    rows = []
    reports = []
    for k, (cf_path, pred_path) in enumerate(zip(args.cf_corpus, args.cf_pred)):
        records = read_cf_corpus(cf_path)
        cf_pred = load_predictions(pred_path)
        report = build_report(
            factual_pred, gold, cf_pred, records, edited_only=args.edited_only
        )
        reports.append(report)
        rows.append((f"run{k}", report))
    median = median_consistency([r.consistency for r in reports])
    print(format_report_table(rows))
    if len(reports) > 1:
        print(f"median consistency: {'undef' if median is None else f'{median:.4f}'}")
    if args.output:
        payload = {
            "runs": [r.to_obj() for r in reports],
            "median_consistency": median,
            "config": {
                "gold": str(args.gold),
                "factual_pred": str(args.factual_pred),
                "cf_corpus": [str(p) for p in args.cf_corpus],
                "cf_pred": [str(p) for p in args.cf_pred],
                "edited_only": args.edited_only,
            },
        }
        Path(args.output).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return 0


def _histogram_lines(label: str, values: list[float], edges: list[float]) -> list[str]:
    counts = [0] * (len(edges) - 1)
    for v in values:
        for b in range(len(counts)):
            last = b == len(counts) - 1
            if edges[b] <= v < edges[b + 1] or (last and v == edges[-1]):
                counts[b] += 1
                break
    peak = max(counts) if counts else 0
    lines = [f"{label} (n={len(values)})"]
    for b, c in enumerate(counts):
        bar = "#" * (0 if peak == 0 else round(24 * c / peak))
        lines.append(f"  [{edges[b]:6.2f}, {edges[b + 1]:6.2f})  {c:6d}  {bar}")
    return lines


def _int_edges(values: list[float]) -> list[float]:
    top = int(max(values)) if values else 0
    step = max(1, (top + 10) // 10)
    edges: list[float] = []
    e = 0
    while e <= top + step:
        edges.append(float(e))
        e += step
    return edges


def _cmd_stats(args: argparse.Namespace) -> int:
    if args.cf:
        records = read_cf_corpus(args.input)
        docs = [r.document for r in records]
        ratios = [r.affected_ratio for r in records]
    else:
        docs = list(read_corpus(args.input).documents)
        ratios = []
    entities = [float(len(d.entities)) for d in docs]
    triples = [float(len(d.triples)) for d in docs]
    out = _histogram_lines("entities per document", entities, _int_edges(entities))
    out.append("")
    out.extend(_histogram_lines("triples per document", triples, _int_edges(triples)))
    if ratios:
        out.append("")
        edges = [i / 10 for i in range(11)]
        out.extend(_histogram_lines("affected ratio", ratios, edges))
    print("\n".join(out))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfre",
        description="Counterfactual corpora for document-level relation extraction.",
    )
    parser.add_argument(
        "--log-level", default="info", choices=["debug", "info", "warning", "error"]
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_clean = sub.add_parser("clean", help="merge shared-surface nodes, drop overlaps")
    p_clean.add_argument("--input", required=True)
    p_clean.add_argument("--output", required=True)
    p_clean.set_defaults(func=_cmd_clean)

    p_pool = sub.add_parser("pool", help="embed entities into a candidate pool")
    p_pool.add_argument("--input", required=True)
    p_pool.add_argument(
        "--provider",
        default="test-hash:64",
        help="cache:PATH | http:URL | test-hash:DIM[:SEED]",
    )
    p_pool.add_argument("--output")
    p_pool.add_argument(
        "--write-manifest",
        metavar="PATH",
        help="also write the deduplicated embedding-text manifest, one per line",
    )
    p_pool.set_defaults(func=_cmd_pool)

    p_gen = sub.add_parser("generate", help="produce counterfactual corpora")
    p_gen.add_argument("--input", required=True)
    p_gen.add_argument("--pool", required=True)
    p_gen.add_argument("--output-dir", required=True)
    p_gen.add_argument("--tau-e-max", type=float, default=0.8)
    p_gen.add_argument("--tau-e-min", type=float, default=0.2)
    p_gen.add_argument("--tau-c", type=float, default=0.4)
    p_gen.add_argument("--m-n", type=int, default=3)
    p_gen.add_argument("--tau-r", type=float, default=0.7)
    p_gen.add_argument("--runs", type=int, default=1)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--max-docs", type=int, default=DEFAULT_MAX_DOCS)
    p_gen.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p_gen.set_defaults(func=_cmd_generate)

    p_eval = sub.add_parser("evaluate", help="score predictions and consistency")
    p_eval.add_argument("--gold", required=True)
    p_eval.add_argument("--factual-pred", required=True)
    p_eval.add_argument("--cf-corpus", action="append", required=True)
    p_eval.add_argument("--cf-pred", action="append", required=True)
    p_eval.add_argument(
        "--edited-only",
        action="store_true",
        help="condition only on triples whose head or tail was replaced",
    )
    p_eval.add_argument("--output", help="also write the report as JSON")
    p_eval.set_defaults(func=_cmd_evaluate)

    p_stats = sub.add_parser("stats", help="corpus histograms")
    p_stats.add_argument("--input", required=True)
    p_stats.add_argument(
        "--cf", action="store_true", help="input is a counterfactual corpus"
    )
    p_stats.set_defaults(func=_cmd_stats)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper()),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except _UsageError as exc:
        parser.error(str(exc))
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
