"""Write a synthetic corpus to disk in the CLI's input formats.

    python scripts/make_synthetic.py out/ --seed 3 --queries 20
    semoverlap ingest out/sets.tsv out/bundle.json --sim cosine --embeddings out/vectors.txt
    semoverlap bench out/bundle.json out/queries.tsv --baseline
"""
import argparse
from pathlib import Path

from semoverlap.synth import WorkloadConfig, make_workload, write_embeddings, write_sets


def main():
    ap = argparse.ArgumentParser(description="Write a synthetic corpus for the CLI.")
    ap.add_argument("out", type=Path)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--queries", type=int, default=20)
    ap.add_argument("--typo-fraction", type=float, default=0.0)
    args = ap.parse_args()

    w = make_workload(args.seed, WorkloadConfig(typo_fraction=args.typo_fraction))
    args.out.mkdir(parents=True, exist_ok=True)
    write_sets(w.sets, args.out / "sets.tsv")
    write_embeddings(w.vectors, args.out / "vectors.txt")
    queries = [w.query] + w.more_queries(args.queries - 1)
    write_sets(queries, args.out / "queries.tsv")
    print(f"{len(w.sets)} sets, {len(w.vectors)} vectors, {len(queries)} queries -> {args.out}")


if __name__ == "__main__":
    main()
