"""Refinement phase: turn the token stream into a small set of candidates.

Every candidate carries two incrementally maintained bounds:

* ``S``, a partial greedy matching over the edges seen so far (seeded with
  the exact-match pairs), which is a lower bound on the overlap;
* ``ub_sum + m * s``, an upper bound. Take the smaller of the two sides of the
  bipartite graph. Each of its elements is matched at most once, so the
  overlap is at most the sum of their best edges. An element that already
  appeared in the stream contributes its first (hence largest) edge, summed
  in ``ub_sum``; each of the ``m`` elements not yet seen contributes at most
  the current stream similarity ``s``.

Candidates are grouped by ``m`` so a single ascending scan per group finds
everything the current threshold rules out.
"""
from __future__ import annotations

import time
from bisect import bisect_left, insort
from dataclasses import dataclass, field
from typing import Callable

from .core import EPS, CandidateSet, Collection, QuerySet, SearchTimeout
from .index import InvertedIndex
from .similarity import TokenStream

# How many stream tuples to process between deadline checks.
CLOCK_EVERY = 256


class MissingEntry(RuntimeError):
    """A bucket did not hold an entry it was expected to hold."""


@dataclass(eq=False)
class CandidateState:
    set_id: int
    size: int
    query_side: bool  # True when the query is the smaller side
    S: float = 0.0
    matched_query: set = field(default_factory=set)
    matched_cand: set = field(default_factory=set)
    hits: set = field(default_factory=set)
    ub_sum: float = 0.0
    small: int = 0
    pruned: bool = False

    @property
    def l(self) -> int:
        return len(self.matched_query)

    @property
    def m(self) -> int:
        return self.small - len(self.hits)

    @property
    def ilb(self) -> float:
        return self.S

    def iub(self, s: float) -> float:
        return self.ub_sum + self.m * s


def init_candidate(c: CandidateSet, q: QuerySet, first_tuple: tuple[int, int, float] | None = None,
                   pos_of: dict[int, int] | None = None) -> CandidateState:
    """State for a set at its first appearance in the stream.

    Exact-match pairs are pre-matched with weight 1, then the arriving edge
    is applied.
    """
    if pos_of is None:
        pos_of = {e: i for i, e in enumerate(q.ids)}
    query_side = len(q) <= len(c)
    st = CandidateState(c.set_id, len(c), query_side, small=min(len(q), len(c)))
    for e in c.elements:
        p = pos_of.get(e)
        if p is not None:
            st.matched_query.add(p)
            st.matched_cand.add(e)
            st.hits.add(p if query_side else e)
    st.S = float(len(st.matched_query))
    st.ub_sum = st.S
    if first_tuple is not None:
        update_ilb(st, first_tuple)
    return st


def update_ilb(state: CandidateState, tup: tuple[int, int, float]) -> tuple[bool, bool]:
    """Apply one stream edge; returns ``(lower_changed, upper_changed)``."""
    pos, t, s = tup
    lower = upper = False
    if pos not in state.matched_query and t not in state.matched_cand:
        state.matched_query.add(pos)
        state.matched_cand.add(t)
        state.S += s
        lower = True
    key = pos if state.query_side else t
    if key not in state.hits:
        state.hits.add(key)
        state.ub_sum += s
        upper = True
    return lower, upper


class BucketIndex:
    """Candidates grouped by ``m``, each group sorted by ``ub_sum``."""

    def __init__(self):
        self.buckets: dict[int, list[tuple[float, int]]] = {}

    def insert(self, sid: int, m: int, ub_sum: float):
        insort(self.buckets.setdefault(m, []), (ub_sum, sid))

    def remove(self, sid: int, m: int, ub_sum: float):
        lst = self.buckets.get(m)
        if lst is None:
            raise MissingEntry(f"no bucket {m} for set {sid}")
        i = bisect_left(lst, (ub_sum, sid))
        if i == len(lst) or lst[i] != (ub_sum, sid):
            raise MissingEntry(f"set {sid} not in bucket {m}")
        del lst[i]
        if not lst:
            del self.buckets[m]

    def bucket_move(self, sid: int, old_m: int, old_ub: float, new_m: int, new_ub: float):
        self.remove(sid, old_m, old_ub)
        self.insert(sid, new_m, new_ub)

    def bucket_prune(self, s: float, theta: float, immune=()) -> list[int]:
        """Remove and return every set with ``ub_sum + m*s <= theta``.

        Members of ``immune`` stay put; the scan steps over them.
        """
        if theta <= 0:
            return []
        out = []
        for m in list(self.buckets):
            lst = self.buckets[m]
            limit = theta - m * s
            keep = []
            i = 0
            while i < len(lst) and lst[i][0] <= limit:
                if lst[i][1] in immune:
                    keep.append(lst[i])
                else:
                    out.append(lst[i][1])
                i += 1
            if i:
                lst[:i] = keep
                if not lst:
                    del self.buckets[m]
        return out

    def __len__(self):
        return sum(len(v) for v in self.buckets.values())

    def __contains__(self, sid):
        return any(e[1] == sid for lst in self.buckets.values() for e in lst)

    def check(self, states: dict[int, CandidateState]):
        """Consistency check used by the tests."""
        seen = set()
        for m, lst in self.buckets.items():
            assert lst == sorted(lst), f"bucket {m} out of order"
            for ub, sid in lst:
                st = states[sid]
                assert st.m == m and st.ub_sum == ub and not st.pruned
                assert sid not in seen
                seen.add(sid)
        live = {sid for sid, st in states.items() if not st.pruned}
        assert seen == live, "bucket membership differs from live candidates"


class TopKList:
    """The k best scores seen, one entry per set."""

    def __init__(self, k: int):
        self.k = k
        self.scores: dict[int, float] = {}

    def update(self, sid: int, score: float) -> bool:
        old = self.scores.get(sid)
        if old is not None:
            if score > old:
                self.scores[sid] = score
                return True
            return False
        if len(self.scores) < self.k:
            self.scores[sid] = score
            return True
        worst = min(self.scores, key=lambda x: (self.scores[x], -x))
        if score > self.scores[worst]:
            del self.scores[worst]
            self.scores[sid] = score
            return True
        return False

    def bottom(self) -> float:
        if len(self.scores) < self.k:
            return 0.0
        return min(self.scores.values())

    def members(self) -> list[tuple[int, float]]:
        return sorted(self.scores.items(), key=lambda p: (-p[1], p[0]))

    def __contains__(self, sid):
        return sid in self.scores

    def __len__(self):
        return len(self.scores)


@dataclass
class RefineStats:
    candidates_seen: int = 0
    iub_pruned: int = 0
    pruned_on_arrival: int = 0
    tuples_consumed: int = 0
    refine_ms: float = 0.0


@dataclass
class RefineResult:
    states: dict[int, CandidateState]
    l_lb: TopKList
    stream: TokenStream
    stats: RefineStats
    theta_trace: list[float]
    pruned: set[int]

    @property
    def survivors(self) -> list[CandidateState]:
        return [st for st in self.states.values() if not st.pruned]


def refine(q: QuerySet, collection: Collection, index: InvertedIndex, stream: TokenStream,
           k: int, *, theta_cell=None, deadline: float | None = None,
           on_state: Callable[["RefineResult"], None] | None = None) -> RefineResult:
    """Consume the whole stream and return the unpruned candidates.

    ``theta_cell`` (anything with ``get()`` and ``update(v)``) shares the
    k-th best lower bound with sibling searches over other partitions.
    ``on_state`` receives the live result object before the first tuple so
    a caller can salvage partial state after a timeout.
    """
    t0 = time.perf_counter()
    by_id = collection._cache.get("by_id")
    if by_id is None:
        by_id = collection._cache["by_id"] = {c.set_id: c for c in collection.sets}
    pos_of = {e: i for i, e in enumerate(q.ids)}
    nq = len(q)

    states: dict[int, CandidateState] = {}
    pruned: set[int] = set()
    buckets = BucketIndex()
    l_lb = TopKList(k)
    stats = RefineStats()
    trace = [0.0]
    res = RefineResult(states, l_lb, stream, stats, trace, pruned)
    if on_state is not None:
        on_state(res)

    def theta():
        t = l_lb.bottom()
        if theta_cell is not None:
            t = max(t, theta_cell.get())
        return t

    def raise_lb(sid, score):
        if l_lb.update(sid, score):
            b = l_lb.bottom()
            if b > trace[-1]:
                trace.append(b)
                if theta_cell is not None:
                    theta_cell.update(b)

    def prune(s, th):
        for sid in buckets.bucket_prune(s, th, l_lb.scores):
            states[sid].pruned = True
            pruned.add(sid)
            stats.iub_pruned += 1

    gate_open = True
    last = None
    while True:
        tup = stream.next_similar_token()
        if tup is None:
            break
        stats.tuples_consumed += 1
        if deadline is not None and stats.tuples_consumed % CLOCK_EVERY == 0 \
                and time.perf_counter() > deadline:
            stats.refine_ms = (time.perf_counter() - t0) * 1e3
            raise SearchTimeout("refinement exceeded the time budget")
        pos, t, s = tup
        th = theta()
        if gate_open and nq * s <= th:
            # no set first seen from here on can beat the threshold
            gate_open = False
        for sid in index.postings(t):
            st = states.get(sid)
            if st is None:
                if not gate_open or sid in pruned:
                    continue
                st = init_candidate(by_id[sid], q, tup, pos_of)
                stats.candidates_seen += 1
                states[sid] = st
                if st.iub(s) <= th:
                    st.pruned = True
                    pruned.add(sid)
                    stats.pruned_on_arrival += 1
                    continue
                buckets.insert(sid, st.m, st.ub_sum)
                raise_lb(sid, st.S)
                continue
            if st.pruned:
                continue
            old_m, old_ub = st.m, st.ub_sum
            lower, upper = update_ilb(st, tup)
            if upper:
                buckets.bucket_move(sid, old_m, old_ub, st.m, st.ub_sum)
            if lower:
                raise_lb(sid, st.S)
        th = theta()
        if (s, th) != last:
            prune(s, th)
            last = (s, th)

    # Stream exhausted: no unseen edge remains, so every bound is final.
    prune(0.0, theta())
    stats.refine_ms = (time.perf_counter() - t0) * 1e3
    return res
