"""Search orchestration: partitioned search, result merging, and the
exhaustive baseline used as ground truth."""
from __future__ import annotations

import threading
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import Collection, QuerySet, SearchParams, SearchTimeout, TooFewResultsWarning
from .index import InvertedIndex, build_inverted_index
from .postproc import PostResult, cache_matcher, postprocess
from .refinement import RefineResult, refine
from .similarity import NeighborTable, SimilarityProvider, TokenStream


class GlobalThetaCell:
    """Monotone maximum shared between partitions."""

    def __init__(self, value: float = 0.0):
        self._value = float(value)
        self._lock = threading.Lock()

    def get(self) -> float:
        return self._value

    def update(self, v: float):
        if v > self._value:
            with self._lock:
                if v > self._value:
                    self._value = float(v)


@dataclass
class SearchStats:
    candidates: int = 0
    iub_pruned: int = 0
    survivors: int = 0
    no_em: int = 0
    em_early_terminated: int = 0
    em_calls: int = 0
    pp_dropped: int = 0
    unverified: int = 0
    report_matchings: int = 0
    tuples_consumed: int = 0
    refine_ms: float = 0.0
    postproc_ms: float = 0.0
    total_ms: float = 0.0
    theta_lb_trace: list = field(default_factory=list)
    theta_ub_trace: list = field(default_factory=list)

    def as_dict(self, traces: bool = False) -> dict:
        d = asdict(self)
        if not traces:
            d.pop("theta_lb_trace")
            d.pop("theta_ub_trace")
        return d


@dataclass
class SearchResult:
    entries: list[tuple[int, float]]
    stats: SearchStats
    exact: bool = True
    too_few: bool = False
    partition_entries: list[list[tuple[int, float]]] | None = None
    scores: dict[int, float] | None = None  # baseline only: every candidate's overlap

    @property
    def score_list(self) -> list[float]:
        return [s for _, s in self.entries]


def partition(collection: Collection, p: int, seed: int = 0) -> list[Collection]:
    """Assign every set to one of ``p`` parts uniformly at random."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if p == 1:
        return [collection]
    assign = np.random.default_rng(seed).integers(0, p, size=len(collection))
    return [collection.subset(np.flatnonzero(assign == i).tolist()) for i in range(p)]


def _prepared(collection: Collection, p: int, seed: int) -> list[tuple[Collection, InvertedIndex]]:
    key = ("parts", p, seed)
    parts = collection._cache.get(key)
    if parts is None:
        if p == 1:
            parts = [(collection, global_index(collection))]
        else:
            parts = [(sub, build_inverted_index(sub)) for sub in partition(collection, p, seed)]
        collection._cache[key] = parts
    return parts


def global_index(collection: Collection) -> InvertedIndex:
    idx = collection._cache.get("index")
    if idx is None:
        idx = collection._cache["index"] = build_inverted_index(collection)
    return idx


def _encode(q, collection) -> QuerySet:
    return q if isinstance(q, QuerySet) else collection.encode_query(q)


def _merge(lists, k):
    merged = sorted((e for lst in lists for e in lst), key=lambda p: (-p[1], p[0]))
    return merged[:k]


def _finish(entries, stats, exact, k, t0, **extra) -> SearchResult:
    stats.total_ms = (time.perf_counter() - t0) * 1e3
    too_few = exact and len(entries) < k
    if too_few:
        warnings.warn(f"only {len(entries)} sets overlap the query; asked for {k}",
                      TooFewResultsWarning, stacklevel=3)
    return SearchResult(entries, stats, exact, too_few, **extra)


def search(q: QuerySet | Sequence[str], collection: Collection, provider: SimilarityProvider,
           params: SearchParams = SearchParams(), *, table: NeighborTable | None = None,
           trace=None) -> SearchResult:
    """Exact top-k search by semantic overlap.

    Each partition runs refinement then verification in its own thread;
    all partitions publish their k-th best lower bound to one shared cell.
    """
    t0 = time.perf_counter()
    q = _encode(q, collection)
    deadline = None if params.timeout_seconds is None else t0 + params.timeout_seconds
    if table is None:
        table = NeighborTable.build(q, provider, collection.dictionary, params.alpha)
    cell = GlobalThetaCell()
    parts = _prepared(collection, params.partitions, params.seed)

    def run(part):
        sub, index = part
        holder: dict = {}
        try:
            ref = refine(q, sub, index, TokenStream(table), params.k, theta_cell=cell,
                         deadline=deadline, on_state=lambda r: holder.setdefault("ref", r))
            post = postprocess(ref, params.k, cache_matcher(ref, sub), theta_cell=cell,
                               workers=params.workers, deadline=deadline,
                               score_results=params.score_results, trace=trace)
            return ref, post, True
        except SearchTimeout:
            return holder.get("ref"), None, False

    if len(parts) == 1:
        runs = [run(parts[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(parts)) as ex:
            runs = list(ex.map(run, parts))

    stats = SearchStats()
    lists = []
    exact = True
    for ref, post, ok in runs:
        exact &= ok
        if ref is not None:
            _add_refine(stats, ref)
        if post is not None:
            _add_post(stats, post)
            lists.append(post.entries)
        elif ref is not None:
            # timed out: the best lower bounds are all we have
            lists.append(ref.l_lb.members())
    if len(runs) == 1 and runs[0][0] is not None:
        stats.theta_lb_trace = list(runs[0][0].theta_trace)
        if runs[0][1] is not None:
            stats.theta_ub_trace = list(runs[0][1].theta_ub_trace)
    return _finish(_merge(lists, params.k), stats, exact, params.k, t0,
                   partition_entries=lists)


def _add_refine(stats: SearchStats, ref: RefineResult):
    s = ref.stats
    stats.candidates += s.candidates_seen
    stats.iub_pruned += s.iub_pruned + s.pruned_on_arrival
    stats.survivors += s.candidates_seen - s.iub_pruned - s.pruned_on_arrival
    stats.tuples_consumed += s.tuples_consumed
    stats.refine_ms += s.refine_ms


def _add_post(stats: SearchStats, post: PostResult):
    s = post.stats
    stats.no_em += s.no_em
    stats.em_early_terminated += s.em_early_terminated
    stats.em_calls += s.em_calls
    stats.pp_dropped += s.pp_dropped
    stats.unverified += s.unverified
    stats.report_matchings += s.report_matchings
    stats.postproc_ms += s.postproc_ms


def assignment_score(w: np.ndarray) -> float:
    if w.size == 0:
        return 0.0
    r, c = linear_sum_assignment(w, maximize=True)
    return float(w[r, c].sum())


def baseline_search(q: QuerySet | Sequence[str], collection: Collection,
                    provider: SimilarityProvider, params: SearchParams = SearchParams(), *,
                    with_iub: bool = False, table: NeighborTable | None = None) -> SearchResult:
    """Score every candidate exactly and keep the k best.

    With ``with_iub`` the candidates are first thinned by refinement's
    bound filter, which changes the work done but never the answer.
    """
    t0 = time.perf_counter()
    q = _encode(q, collection)
    deadline = None if params.timeout_seconds is None else t0 + params.timeout_seconds
    if table is None:
        table = NeighborTable.build(q, provider, collection.dictionary, params.alpha)
    index = global_index(collection)
    stream = TokenStream(table)
    stats = SearchStats()
    try:
        if with_iub:
            ref = refine(q, collection, index, stream, params.k, deadline=deadline)
            _add_refine(stats, ref)
            cands = sorted(st.set_id for st in ref.survivors)
        else:
            seen: set[int] = set()
            for _, t, _ in stream:
                seen.update(index.postings(t))
            cands = sorted(seen)
            stats.tuples_consumed = stream.emitted
            stats.refine_ms = (time.perf_counter() - t0) * 1e3
            stats.candidates = stats.survivors = len(cands)
    except SearchTimeout:
        return _finish([], stats, False, params.k, t0)
    t1 = time.perf_counter()
    by_id = {c.set_id: c for c in collection.sets}
    scores = {}
    exact = True
    for sid in cands:
        if deadline is not None and time.perf_counter() > deadline:
            exact = False
            break
        scores[sid] = assignment_score(stream.weight_matrix(by_id[sid].elements))
        stats.em_calls += 1
    stats.postproc_ms = (time.perf_counter() - t1) * 1e3
    entries = _merge([scores.items()], params.k)
    return _finish(entries, stats, exact, params.k, t0, scores=scores)
