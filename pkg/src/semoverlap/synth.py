"""Synthetic workloads: clustered embeddings, topical sets, perturbed queries.

Words in one cluster are near-synonyms (cosine roughly 0.75 to 0.95 for the
default noise range); words in different clusters are nearly orthogonal.
A set draws its words from the clusters of one topic, so sets of a topic
share meaning more often than they share strings. Queries are copies of a
collection set with some words swapped for cluster-mates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Collection
from .similarity import CosineEmbedding


@dataclass(frozen=True)
class WorkloadConfig:
    n_sets: tuple[int, int] = (200, 500)
    cardinality: tuple[int, int] = (3, 50)
    skew: float = 1.6  # power-law exponent for set sizes
    dim: int = 16
    n_clusters: int = 60
    words_per_cluster: tuple[int, int] = (3, 8)
    sigma: tuple[float, float] = (0.05, 0.15)
    clusters_per_topic: int = 5
    stray_fraction: float = 0.15  # words drawn from anywhere in the vocabulary
    swap_fraction: float = 0.35  # query words replaced by a cluster-mate
    typo_fraction: float = 0.0  # words that get a misspelt twin with a nearby vector
    typo_sigma: float = 0.03


@dataclass
class Workload:
    collection: Collection
    provider: CosineEmbedding
    query: list[str]
    vectors: dict[str, np.ndarray]
    seed: int
    clusters: list[list[str]]
    sets: list[list[str]]

    def more_queries(self, n: int, swap_fraction: float = 0.35, seed: int = 0) -> list[list[str]]:
        rng = np.random.default_rng([self.seed, seed])
        return [perturbed_copy(self.sets[int(rng.integers(len(self.sets)))], self.clusters,
                               rng, swap_fraction) for _ in range(n)]


def perturbed_copy(tokens, clusters, rng: np.random.Generator, swap_fraction: float) -> list[str]:
    """Swap each token for a random cluster-mate with the given probability."""
    where = {w: c for c, ws in enumerate(clusters) for w in ws}
    out = []
    for w in tokens:
        if rng.random() < swap_fraction:
            mates = clusters[where[w]]
            w = mates[int(rng.integers(len(mates)))]
        out.append(w)
    return list(dict.fromkeys(out))


def power_law_size(rng: np.random.Generator, lo: int, hi: int, a: float) -> int:
    sizes = np.arange(lo, hi + 1)
    p = sizes.astype(float) ** -a
    return int(rng.choice(sizes, p=p / p.sum()))


def misspell(word: str, rng: np.random.Generator) -> str:
    """Double one character; the result never collides with a generated name."""
    i = int(rng.integers(len(word)))
    return word[:i + 1] + word[i] + word[i + 1:] + "~"


def make_vectors(rng: np.random.Generator, cfg: WorkloadConfig):
    centers = rng.standard_normal((cfg.n_clusters, cfg.dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    vectors: dict[str, np.ndarray] = {}
    clusters: list[list[str]] = []
    for c in range(cfg.n_clusters):
        sigma = rng.uniform(*cfg.sigma)
        n = int(rng.integers(cfg.words_per_cluster[0], cfg.words_per_cluster[1] + 1))
        words = []
        for j in range(n):
            v = centers[c] + sigma * rng.standard_normal(cfg.dim)
            w = f"w{c}_{j}"
            vectors[w] = v / np.linalg.norm(v)
            words.append(w)
            if rng.random() < cfg.typo_fraction:
                t = misspell(w, rng)
                u = vectors[w] + cfg.typo_sigma * rng.standard_normal(cfg.dim)
                vectors[t] = u / np.linalg.norm(u)
                words.append(t)
        clusters.append(words)
    return vectors, clusters


def make_workload(seed: int, cfg: WorkloadConfig = WorkloadConfig()) -> Workload:
    rng = np.random.default_rng(seed)
    vectors, clusters = make_vectors(rng, cfg)
    vocab = list(vectors)
    n_topics = max(1, cfg.n_clusters // cfg.clusters_per_topic)
    topics = [rng.choice(cfg.n_clusters, size=cfg.clusters_per_topic, replace=False)
              for _ in range(n_topics)]

    n_sets = int(rng.integers(cfg.n_sets[0], cfg.n_sets[1] + 1))
    sets = []
    for _ in range(n_sets):
        topic = topics[int(rng.integers(n_topics))]
        pool = [w for c in topic for w in clusters[c]]
        size = min(power_law_size(rng, *cfg.cardinality, cfg.skew), len(vocab))
        chosen = set()
        while len(chosen) < size:
            src = vocab if rng.random() < cfg.stray_fraction else pool
            chosen.add(src[int(rng.integers(len(src)))])
        sets.append(sorted(chosen))
    collection = Collection.from_token_sets(sets)

    base = sets[int(rng.integers(len(sets)))]
    query = perturbed_copy(base, clusters, rng, cfg.swap_fraction)
    provider = CosineEmbedding(vectors, source=f"synthetic:{seed}")
    return Workload(collection, provider, query, vectors, seed, clusters, sets)


def write_embeddings(vectors: dict[str, np.ndarray], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        dim = len(next(iter(vectors.values()))) if vectors else 0
        fh.write(f"{len(vectors)} {dim}\n")
        for w, v in vectors.items():
            fh.write(w + " " + " ".join(f"{x:.8f}" for x in v) + "\n")


def write_sets(sets, path, delimiter: str = "\t") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in sets:
            fh.write(delimiter.join(s) + "\n")
