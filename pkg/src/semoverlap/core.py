"""Domain types shared across the search pipeline.

Sets are stored as sorted tuples of dense integer ids into a dictionary of
distinct element strings. Scores are plain floats compared with an absolute
tolerance of ``EPS``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

EPS = 1e-9


class SemOverlapError(Exception):
    """Base class for errors raised by this package."""


class SearchTimeout(SemOverlapError):
    """Raised when a search exceeds its time budget."""


class ParseError(SemOverlapError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TooFewResultsWarning(UserWarning):
    """Fewer than k sets have a positive overlap with the query."""


def apply_threshold(sim: float, alpha: float) -> float:
    return sim if sim >= alpha else 0.0


@dataclass(frozen=True)
class CandidateSet:
    set_id: int
    elements: tuple[int, ...]

    def __post_init__(self):
        if not self.elements:
            raise ValueError(f"set {self.set_id} is empty")
        if any(a >= b for a, b in zip(self.elements, self.elements[1:])):
            raise ValueError(f"set {self.set_id}: elements must be strictly ascending")

    def __len__(self):
        return len(self.elements)


@dataclass(frozen=True)
class QuerySet:
    """A query, encoded against a collection dictionary.

    ``ids`` is sorted and duplicate-free. Tokens missing from the dictionary
    get temporary ids at or above ``len(dictionary)``; they never occur in a
    candidate set but still take part in similarity lookups.
    """

    ids: tuple[int, ...]
    tokens: tuple[str, ...]
    vocab_size: int

    def __len__(self):
        return len(self.ids)

    def in_dictionary(self, pos: int) -> bool:
        return self.ids[pos] < self.vocab_size

    @property
    def raw_strings(self) -> tuple[str, ...]:
        return tuple(t for i, t in zip(self.ids, self.tokens) if i >= self.vocab_size)


def vanilla_overlap(q: QuerySet | Iterable[int], c: CandidateSet | Iterable[int]) -> int:
    qs = q.ids if isinstance(q, QuerySet) else q
    cs = c.elements if isinstance(c, CandidateSet) else c
    return len(set(qs).intersection(cs))


@dataclass
class Collection:
    """The repository of candidate sets plus its element dictionary."""

    sets: list[CandidateSet]
    dictionary: list[str]
    token_to_id: dict[str, int] = field(repr=False)
    element_count: list[int] = field(repr=False)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_token_sets(cls, token_sets: Iterable[Iterable[str]]) -> "Collection":
        dictionary: list[str] = []
        token_to_id: dict[str, int] = {}
        counts: list[int] = []
        sets = []
        for raw in token_sets:
            ids = set()
            for tok in raw:
                tid = token_to_id.get(tok)
                if tid is None:
                    tid = token_to_id[tok] = len(dictionary)
                    dictionary.append(tok)
                    counts.append(0)
                ids.add(tid)
            if not ids:
                continue
            for tid in ids:
                counts[tid] += 1
            sets.append(CandidateSet(len(sets), tuple(sorted(ids))))
        return cls(sets, dictionary, token_to_id, counts)

    @classmethod
    def from_encoded(cls, dictionary: Sequence[str], sets: Iterable[Sequence[int]]) -> "Collection":
        dictionary = list(dictionary)
        token_to_id = {t: i for i, t in enumerate(dictionary)}
        if len(token_to_id) != len(dictionary):
            raise ValueError("dictionary contains duplicate tokens")
        counts = [0] * len(dictionary)
        out = []
        for sid, elems in enumerate(sets):
            cs = CandidateSet(sid, tuple(elems))
            for e in cs.elements:
                if not 0 <= e < len(dictionary):
                    raise ValueError(f"set {sid} references unknown element id {e}")
                counts[e] += 1
            out.append(cs)
        return cls(out, dictionary, token_to_id, counts)

    def __len__(self):
        return len(self.sets)

    def tokens_of(self, c: CandidateSet) -> list[str]:
        return [self.dictionary[e] for e in c.elements]

    def encode_query(self, tokens: Iterable[str]) -> QuerySet:
        known: dict[int, str] = {}
        oov: list[str] = []
        for tok in dict.fromkeys(tokens):
            tid = self.token_to_id.get(tok)
            if tid is None:
                oov.append(tok)
            else:
                known[tid] = tok
        pairs = sorted(known.items())
        pairs += [(len(self.dictionary) + i, tok) for i, tok in enumerate(oov)]
        return QuerySet(
            tuple(p[0] for p in pairs), tuple(p[1] for p in pairs), len(self.dictionary)
        )

    def subset(self, set_ids: Iterable[int]) -> "Collection":
        """A view over some of the sets that shares this dictionary."""
        chosen = [self.sets[i] for i in set_ids]
        return Collection(chosen, self.dictionary, self.token_to_id, self.element_count)


@dataclass(frozen=True)
class SearchParams:
    k: int = 10
    alpha: float = 0.8
    partitions: int = 10
    timeout_seconds: float | None = 2500
    workers: int = 1
    seed: int = 0
    score_results: bool = True

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.partitions < 1:
            raise ValueError("partitions must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.timeout_seconds is not None and self.timeout_seconds <= 0:
            raise ValueError("timeout_seconds must be positive")
