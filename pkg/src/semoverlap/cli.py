"""Command-line interface: ``ingest``, ``query`` and ``bench``.

Exit codes: 0 success (warnings included), 1 usage error, 2 data error,
3 timeout.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from pathlib import Path

from .bundle import Bundle, ingest, parse_line, read_sets
from .core import SearchParams, SemOverlapError, TooFewResultsWarning
from .engine import SearchResult, baseline_search, search
from .similarity import PROVIDERS

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_TIMEOUT = 0, 1, 2, 3

BENCH_COLUMNS = ["query_cardinality", "candidates", "iub_pruned", "no_em", "em_early_terminated",
                 "em_calls", "refine_ms", "postproc_ms", "total_ms", "top1_score"]


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _provider_flags(p):
    p.add_argument("--sim", choices=PROVIDERS, help="element similarity provider")
    p.add_argument("--embeddings", help="embedding text file for --sim cosine")
    p.add_argument("--table", help="tab-separated pair table for --sim table")
    p.add_argument("--q", type=int, help="gram length for --sim qgram-jaccard")


def _search_flags(p):
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--alpha", type=float, default=0.8)
    p.add_argument("--partitions", type=int, default=10)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timeout", type=float, default=2500.0, help="seconds")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--baseline", action="store_true", help="score every candidate exactly")
    p.add_argument("--delimiter", default="\t")


def build_parser() -> argparse.ArgumentParser:
    ap = Parser(prog="semoverlap", description="Top-k set search by semantic overlap.")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=Parser)

    p = sub.add_parser("ingest", help="index a set file")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--delimiter", default="\t")
    p.add_argument("--drop-numeric", action="store_true", help="remove purely numeric tokens")
    _provider_flags(p)

    p = sub.add_parser("query", help="run one query")
    p.add_argument("bundle")
    p.add_argument("query", help="query file, or an inline delimiter-separated token list")
    p.add_argument("--stats", action="store_true")
    _search_flags(p)
    _provider_flags(p)

    p = sub.add_parser("bench", help="run a query file and report counters as CSV")
    p.add_argument("bundle")
    p.add_argument("queries")
    p.add_argument("--out", help="CSV path (default: stdout)")
    _search_flags(p)
    _provider_flags(p)
    return ap


def _params(args) -> SearchParams:
    try:
        return SearchParams(k=args.k, alpha=args.alpha, partitions=args.partitions,
                            timeout_seconds=args.timeout, workers=args.workers, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _provider(bundle: Bundle, args):
    return bundle.provider(name=args.sim, embeddings=args.embeddings, table=args.table, q=args.q)


def _run(bundle, provider, tokens, params, baseline) -> SearchResult:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TooFewResultsWarning)
        if baseline:
            res = baseline_search(tokens, bundle.collection, provider, params)
        else:
            res = search(tokens, bundle.collection, provider, params)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return res


def cmd_ingest(args) -> int:
    cfg = {"name": args.sim or "exact"}
    if args.embeddings:
        cfg["embeddings"] = str(Path(args.embeddings).resolve())
    if args.table:
        cfg["table"] = str(Path(args.table).resolve())
    if args.q:
        cfg["q"] = args.q
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        bundle = ingest(args.input, delimiter=args.delimiter, drop_numeric=args.drop_numeric,
                        provider_config=cfg)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    bundle.provider()  # fail now rather than at query time
    bundle.save(args.output)
    c = bundle.collection
    print(f"indexed {len(c)} sets, {len(c.dictionary)} distinct elements -> {args.output}",
          file=sys.stderr)
    return EXIT_OK


def read_query(spec: str, delimiter: str) -> list[str]:
    path = Path(spec)
    if path.is_file():
        toks = [t for line in path.read_text(encoding="utf-8").splitlines()
                for t in parse_line(line, delimiter)]
        return list(dict.fromkeys(toks))
    return parse_line(spec, delimiter)


def cmd_query(args) -> int:
    params = _params(args)
    bundle = Bundle.load(args.bundle)
    provider = _provider(bundle, args)
    tokens = read_query(args.query, args.delimiter)
    if not tokens:
        raise UsageError("the query is empty")
    res = _run(bundle, provider, tokens, params, args.baseline)
    for rank, (sid, score) in enumerate(res.entries, 1):
        print(f"{rank}\t{sid}\t{score:.9f}")
    if args.stats:
        stats = res.stats.as_dict()
        stats.update(exact=res.exact, too_few=res.too_few)
        print("#stats " + json.dumps(stats, sort_keys=True))
    if not res.exact:
        print("error: time budget exceeded; results are partial", file=sys.stderr)
        return EXIT_TIMEOUT
    return EXIT_OK


def bench_row(tokens, res: SearchResult) -> dict:
    s = res.stats
    return {
        "query_cardinality": len(tokens), "candidates": s.candidates, "iub_pruned": s.iub_pruned,
        "no_em": s.no_em, "em_early_terminated": s.em_early_terminated, "em_calls": s.em_calls,
        "refine_ms": round(s.refine_ms, 3), "postproc_ms": round(s.postproc_ms, 3),
        "total_ms": round(s.total_ms, 3),
        "top1_score": round(res.entries[0][1], 9) if res.entries else 0.0,
    }


def cmd_bench(args) -> int:
    params = _params(args)
    bundle = Bundle.load(args.bundle)
    provider = _provider(bundle, args)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        queries = read_sets(args.queries, args.delimiter)
    columns = BENCH_COLUMNS + (["baseline_em_calls"] if args.baseline else [])
    rows = []
    timed_out = False
    for tokens in queries:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TooFewResultsWarning)
            res = search(tokens, bundle.collection, provider, params)
            row = bench_row(tokens, res)
            timed_out |= not res.exact
            if args.baseline:
                base = baseline_search(tokens, bundle.collection, provider, params)
                row["baseline_em_calls"] = base.stats.em_calls
                timed_out |= not base.exact
        rows.append(row)
    mean = {"query_cardinality": "mean"}
    for col in columns[1:]:
        mean[col] = round(sum(r[col] for r in rows) / len(rows), 3) if rows else 0
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.DictWriter(out, fieldnames=columns)
        w.writeheader()
        w.writerows(rows)
        w.writerow(mean)
    finally:
        if args.out:
            out.close()
    return EXIT_TIMEOUT if timed_out else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"ingest": cmd_ingest, "query": cmd_query, "bench": cmd_bench}[args.cmd]
    try:
        return handler(args)
    except UsageError as exc:
        print(f"semoverlap: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SemOverlapError, OSError, ValueError) as exc:
        print(f"semoverlap: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
