"""Element similarity providers and the merged token stream.

A provider maps two element strings to a similarity in [0, 1]; it must be
symmetric and return exactly 1.0 for identical strings. The token stream
merges, per query element, the dictionary neighbours at or above ``alpha``
into one globally non-increasing sequence of ``(query_pos, element_id, sim)``
tuples.
"""
from __future__ import annotations

import heapq
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from .core import ParseError, QuerySet, SemOverlapError

NEIGHBOR_BATCH = 100


class DimensionMismatch(ValueError):
    pass


class ZeroVector(ValueError):
    pass


class UnknownProvider(SemOverlapError):
    pass


def cosine_sim(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.ndim != 1 or u.size == 0:
        raise DimensionMismatch(f"cannot compare shapes {u.shape} and {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ZeroVector("cosine similarity is undefined for a zero vector")
    return min(1.0, max(0.0, float(u @ v) / (nu * nv)))


def qgrams(s: str, q: int) -> frozenset[str]:
    if len(s) < q:
        return frozenset([s])
    return frozenset(s[i:i + q] for i in range(len(s) - q + 1))


def qgram_jaccard(a: str, b: str, q: int = 3) -> float:
    if q < 1:
        raise ValueError("q must be >= 1")
    if a == b:
        return 1.0
    ga, gb = qgrams(a, q), qgrams(b, q)
    return len(ga & gb) / len(ga | gb)


class SimilarityProvider(ABC):
    name: str = "abstract"

    @abstractmethod
    def sim(self, a: str, b: str) -> float:
        ...

    def sim_many(self, a: str, tokens: Sequence[str]) -> np.ndarray:
        return np.fromiter((self.sim(a, t) for t in tokens), dtype=float, count=len(tokens))

    def config(self) -> dict:
        return {"name": self.name}


class ExactSimilarity(SimilarityProvider):
    """String equality; turns semantic overlap into vanilla overlap."""

    name = "exact"

    def sim(self, a, b):
        return 1.0 if a == b else 0.0

    def sim_many(self, a, tokens):
        return np.array([1.0 if t == a else 0.0 for t in tokens])


class QGramJaccard(SimilarityProvider):
    name = "qgram-jaccard"

    def __init__(self, q: int = 3):
        if q < 1:
            raise ValueError("q must be >= 1")
        self.q = q
        self._grams: dict[str, frozenset[str]] = {}

    def _g(self, s):
        g = self._grams.get(s)
        if g is None:
            g = self._grams[s] = qgrams(s, self.q)
        return g

    def sim(self, a, b):
        if a == b:
            return 1.0
        ga, gb = self._g(a), self._g(b)
        return len(ga & gb) / len(ga | gb)

    def config(self):
        return {"name": self.name, "q": self.q}


class CosineEmbedding(SimilarityProvider):
    """Cosine similarity of embedding vectors, negative values clamped to 0.

    Tokens without a vector only match themselves.
    """

    name = "cosine"

    def __init__(self, vectors: Mapping[str, Sequence[float]] | None = None, *,
                 tokens: Sequence[str] | None = None, matrix=None, source: str | None = None):
        if vectors is not None:
            tokens = list(vectors)
            matrix = np.array([vectors[t] for t in tokens], dtype=float) if tokens else np.zeros((0, 1))
        if tokens is None or matrix is None:
            raise ValueError("pass either a vector mapping or tokens + matrix")
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != len(tokens):
            raise DimensionMismatch("matrix rows must match tokens")
        norms = np.linalg.norm(matrix, axis=1)
        if np.any(norms == 0):
            bad = tokens[int(np.argmax(norms == 0))]
            raise ZeroVector(f"embedding for {bad!r} is a zero vector")
        self.dim = matrix.shape[1]
        self.unit = matrix / norms[:, None]
        self.row = {t: i for i, t in enumerate(tokens)}
        self.source = source

    def vector(self, token: str) -> np.ndarray | None:
        r = self.row.get(token)
        return None if r is None else self.unit[r]

    def sim(self, a, b):
        if a == b:
            return 1.0
        va, vb = self.vector(a), self.vector(b)
        if va is None or vb is None:
            return 0.0
        return min(1.0, max(0.0, float(va @ vb)))

    def _rows(self, tokens: Sequence[str]) -> np.ndarray:
        return np.array([self.row.get(t, -1) for t in tokens], dtype=np.int64)

    def sim_many(self, a, tokens):
        rows = self._rows(tokens)
        out = np.zeros(len(tokens))
        va = self.vector(a)
        if va is not None and len(tokens):
            have = rows >= 0
            out[have] = np.clip(self.unit[rows[have]] @ va, 0.0, 1.0)
        for i, t in enumerate(tokens):
            if t == a:
                out[i] = 1.0
        return out

    def config(self):
        return {"name": self.name, "embeddings": self.source}


class TableSimilarity(SimilarityProvider):
    """Similarities looked up in an explicit symmetric pair table."""

    name = "table"

    def __init__(self, pairs: Mapping[tuple[str, str], float], source: str | None = None):
        self.table: dict[tuple[str, str], float] = {}
        for (a, b), s in pairs.items():
            if not 0 <= s <= 1:
                raise ValueError(f"similarity of ({a!r}, {b!r}) outside [0, 1]")
            self.table[(a, b)] = self.table[(b, a)] = float(s)
        self.source = source

    def sim(self, a, b):
        if a == b:
            return 1.0
        return self.table.get((a, b), 0.0)

    def config(self):
        return {"name": self.name, "table": self.source}


def load_embeddings(path: str | Path) -> CosineEmbedding:
    """Read a text embedding dump: ``token v1 ... vd`` per line.

    An optional first line ``count dim`` is detected and skipped.
    """
    tokens: list[str] = []
    rows: list[list[float]] = []
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").split(" ")
            parts = [p for p in parts if p]
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                dim = int(parts[1])
                continue
            try:
                vec = [float(x) for x in parts[1:]]
            except ValueError as exc:
                raise ParseError(f"bad number in embedding row: {exc}", lineno) from None
            if not vec:
                raise ParseError("embedding row has no components", lineno)
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise ParseError(f"expected {dim} components, got {len(vec)}", lineno)
            if not any(vec):
                raise ParseError(f"zero vector for {parts[0]!r}", lineno)
            tokens.append(parts[0])
            rows.append(vec)
    matrix = np.array(rows, dtype=float) if rows else np.zeros((0, dim or 1))
    return CosineEmbedding(tokens=tokens, matrix=matrix, source=str(path))


def load_table(path: str | Path) -> TableSimilarity:
    """Read ``a<TAB>b<TAB>sim`` lines into a table provider."""
    pairs = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError("expected three tab-separated fields", lineno)
            try:
                pairs[(parts[0], parts[1])] = float(parts[2])
            except ValueError:
                raise ParseError(f"bad similarity {parts[2]!r}", lineno) from None
    return TableSimilarity(pairs, source=str(path))


PROVIDERS = ("cosine", "qgram-jaccard", "exact", "table")


def make_provider(name: str, *, embeddings=None, q: int = 3, table=None) -> SimilarityProvider:
    if name == "exact":
        return ExactSimilarity()
    if name == "qgram-jaccard":
        return QGramJaccard(q)
    if name == "cosine":
        if embeddings is None:
            raise UnknownProvider("the cosine provider needs an embedding file")
        return load_embeddings(embeddings)
    if name == "table":
        if table is None:
            raise UnknownProvider("the table provider needs a similarity table file")
        return load_table(table)
    raise UnknownProvider(f"unknown similarity provider {name!r}; choose from {', '.join(PROVIDERS)}")


def brute_force_neighbors(token: str, provider: SimilarityProvider,
                          dictionary: Sequence[str], alpha: float) -> list[tuple[int, float]]:
    """All dictionary ids within ``alpha`` of ``token``, most similar first.

    Ties are ordered by ascending id. The dictionary is scanned in fixed-size
    batches; batching never changes the output.
    """
    found: list[tuple[int, float]] = []
    for start in range(0, len(dictionary), NEIGHBOR_BATCH):
        batch = dictionary[start:start + NEIGHBOR_BATCH]
        sims = provider.sim_many(token, batch)
        for off in np.flatnonzero(sims >= alpha):
            found.append((start + int(off), float(sims[off])))
    found.sort(key=lambda p: (-p[1], p[0]))
    return found


class NeighborTable:
    """Per-query-element neighbour lists; read-only and shareable.

    A query element that is in the dictionary always leads its own list with
    the identity pair at similarity 1.0.
    """

    def __init__(self, query: QuerySet, lists: list[list[tuple[int, float]]], alpha: float):
        self.query = query
        self.lists = lists
        self.alpha = alpha

    @classmethod
    def build(cls, query: QuerySet, provider: SimilarityProvider,
              dictionary: Sequence[str], alpha: float) -> "NeighborTable":
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        lists = []
        for pos, (qid, tok) in enumerate(zip(query.ids, query.tokens)):
            nbrs = brute_force_neighbors(tok, provider, dictionary, alpha)
            if query.in_dictionary(pos):
                nbrs = [(qid, 1.0)] + [p for p in nbrs if p[0] != qid]
            lists.append(nbrs)
        return cls(query, lists, alpha)

    def total(self) -> int:
        return sum(len(x) for x in self.lists)


class TokenStream:
    """Merged stream over a :class:`NeighborTable`.

    The frontier holds at most one pending tuple per query element; popping
    a tuple refills only from that element's list. Every emitted similarity
    is remembered in ``cache[query_pos][element_id]``.
    """

    def __init__(self, table: NeighborTable):
        self.table = table
        self.query = table.query
        self.cursor = [0] * len(table.lists)
        self.cache: list[dict[int, float]] = [dict() for _ in table.lists]
        self.last_sim = 1.0
        self.emitted = 0
        self._heap: list[tuple[float, int, int, int]] = []
        for pos in range(len(table.lists)):
            self._push(pos)

    def _push(self, pos: int):
        lst = self.table.lists[pos]
        i = self.cursor[pos]
        if i < len(lst):
            t, s = lst[i]
            self.cursor[pos] = i + 1
            heapq.heappush(self._heap, (-s, self.query.ids[pos], t, pos))

    def next_similar_token(self) -> tuple[int, int, float] | None:
        while self._heap:
            neg_s, _, t, pos = heapq.heappop(self._heap)
            self._push(pos)
            if t in self.cache[pos]:
                continue
            s = -neg_s
            self.cache[pos][t] = s
            self.last_sim = s
            self.emitted += 1
            return pos, t, s
        return None

    def __iter__(self) -> Iterator[tuple[int, int, float]]:
        while True:
            item = self.next_similar_token()
            if item is None:
                return
            yield item

    def exhausted(self) -> bool:
        return not self._heap

    def drain(self):
        """Consume the rest of the stream so the cache is complete."""
        for _ in self:
            pass

    def weight_matrix(self, elements: Sequence[int]) -> np.ndarray:
        w = np.zeros((len(self.cache), len(elements)))
        for i, row in enumerate(self.cache):
            if row:
                for j, e in enumerate(elements):
                    s = row.get(e)
                    if s is not None:
                        w[i, j] = s
        return w


def open_token_stream(query: QuerySet, provider: SimilarityProvider,
                      dictionary: Sequence[str], alpha: float) -> TokenStream:
    return TokenStream(NeighborTable.build(query, provider, dictionary, alpha))


def weight_matrix(query_tokens: Sequence[str], cand_tokens: Sequence[str],
                  provider: SimilarityProvider, alpha: float) -> np.ndarray:
    """Thresholded similarity matrix computed straight from the provider."""
    w = np.zeros((len(query_tokens), len(cand_tokens)))
    for i, a in enumerate(query_tokens):
        row = provider.sim_many(a, list(cand_tokens))
        row[row < alpha] = 0.0
        w[i] = row
    return w
