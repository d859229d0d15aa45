"""Pruning counters and response times over seeded synthetic workloads.

Prints one CSV row per query (the same columns as ``semoverlap bench``,
plus baseline matching counts) and a mean row.

    python scripts/run_benchmark.py --workloads 50 --k 10 --partitions 1
"""
import argparse
import csv
import sys
import warnings

from semoverlap.cli import BENCH_COLUMNS, bench_row
from semoverlap.core import SearchParams, TooFewResultsWarning
from semoverlap.engine import baseline_search, search
from semoverlap.synth import make_workload


def main():
    ap = argparse.ArgumentParser(description="Benchmark the search against the baselines.")
    ap.add_argument("--workloads", type=int, default=50)
    ap.add_argument("--k", type=int, default=10)
    ap.add_argument("--alpha", type=float, default=0.8)
    ap.add_argument("--partitions", type=int, default=1)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0, help="first workload seed")
    args = ap.parse_args()
    warnings.simplefilter("ignore", TooFewResultsWarning)

    params = SearchParams(k=args.k, alpha=args.alpha, partitions=args.partitions,
                          workers=args.workers)
    cols = BENCH_COLUMNS + ["baseline_em_calls", "baseline_plus_em_calls", "baseline_ms"]
    out = csv.DictWriter(sys.stdout, fieldnames=cols)
    out.writeheader()
    rows = []
    for seed in range(args.seed, args.seed + args.workloads):
        w = make_workload(seed)
        res = search(w.query, w.collection, w.provider, params)
        base = baseline_search(w.query, w.collection, w.provider, params)
        plus = baseline_search(w.query, w.collection, w.provider, params, with_iub=True)
        row = bench_row(w.query, res)
        row.update(baseline_em_calls=base.stats.em_calls,
                   baseline_plus_em_calls=plus.stats.em_calls,
                   baseline_ms=round(base.stats.total_ms, 3))
        out.writerow(row)
        rows.append(row)
    mean = {"query_cardinality": "mean"}
    for c in cols[1:]:
        mean[c] = round(sum(r[c] for r in rows) / len(rows), 3)
    out.writerow(mean)


if __name__ == "__main__":
    main()
