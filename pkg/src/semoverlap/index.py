"""Inverted index from dictionary element ids to the sets containing them."""
from __future__ import annotations

from .core import Collection


class InvertedIndex:
    def __init__(self, postings: dict[int, list[int]]):
        self._postings = postings

    def postings(self, t: int) -> list[int]:
        return self._postings.get(t, [])

    def __len__(self):
        return len(self._postings)

    def total_postings(self) -> int:
        return sum(len(v) for v in self._postings.values())

    def items(self):
        return self._postings.items()

    def to_dict(self) -> dict[int, list[int]]:
        return {t: list(v) for t, v in sorted(self._postings.items())}

    def __eq__(self, other):
        return isinstance(other, InvertedIndex) and self.to_dict() == other.to_dict()


def build_inverted_index(collection: Collection) -> InvertedIndex:
    postings: dict[int, list[int]] = {}
    for c in collection.sets:
        for e in c.elements:
            postings.setdefault(e, []).append(c.set_id)
    for lst in postings.values():
        lst.sort()
    return InvertedIndex(postings)


def postings(index: InvertedIndex, t: int) -> list[int]:
    return index.postings(t)
