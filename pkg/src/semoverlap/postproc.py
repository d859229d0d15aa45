"""Verification phase: settle the surviving candidates with as few exact
matchings as possible.

Two lists drive the loop. ``L_lb`` holds the k best lower bounds (its bottom
is theta_lb); ``L_ub`` holds the k live candidates with the largest upper
bounds (its bottom is theta_ub). A member whose lower bound reaches theta_ub
is in the answer without matching. Other members are matched exactly in
descending UB order, and a matching is abandoned once its label sum shows it
cannot reach theta_lb.
"""
from __future__ import annotations

import heapq
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from typing import Callable

from .core import EPS, SearchTimeout
from .matching import MatchOutcome, hungarian_so
from .refinement import RefineResult

Matcher = Callable[[int, Callable[[], float]], MatchOutcome]


def no_em_check(lb: float, theta_ub: float) -> bool:
    return lb >= theta_ub


@dataclass
class PostStats:
    em_calls: int = 0
    em_early_terminated: int = 0
    no_em: int = 0
    pp_dropped: int = 0
    unverified: int = 0
    report_matchings: int = 0
    postproc_ms: float = 0.0


@dataclass
class PostResult:
    entries: list[tuple[int, float]]
    stats: PostStats
    theta_ub_trace: list[float]
    outcome: dict[int, str] = field(default_factory=dict)


def cache_matcher(refined: RefineResult, collection) -> Matcher:
    """Exact matching on matrices read from the stream's similarity cache."""
    by_id = collection._cache.get("by_id") or {c.set_id: c for c in collection.sets}
    stream = refined.stream

    def run(sid, probe):
        return hungarian_so(stream.weight_matrix(by_id[sid].elements), theta_probe=probe)

    return run


def postprocess(refined: RefineResult, k: int, matcher: Matcher, *, theta_cell=None,
                workers: int = 1, deadline: float | None = None, score_results: bool = True,
                trace: Callable[[str, int], None] | None = None) -> PostResult:
    """Return the top-k of the refined candidates with exact scores.

    Members accepted without matching only have bounds; with
    ``score_results`` they are matched once more at the end (counted as
    ``report_matchings``, not as verification work) so every returned score
    is exact.
    """
    t0 = time.perf_counter()
    stats = PostStats()
    l_lb = refined.l_lb
    lb = {st.set_id: st.S for st in refined.survivors}
    ub = {st.set_id: st.ub_sum for st in refined.survivors}
    exact: dict[int, float] = {}
    outcome: dict[int, str] = {}
    emit = trace or (lambda ev, sid: None)

    cur = [0.0]

    def refresh_theta():
        t = l_lb.bottom()
        if t > refined.theta_trace[-1]:
            refined.theta_trace.append(t)
        if theta_cell is not None:
            theta_cell.update(t)
            t = max(t, theta_cell.get())
        cur[0] = max(cur[0], t)
        return cur[0]

    def theta():
        if theta_cell is not None:
            cur[0] = max(cur[0], theta_cell.get())
        return cur[0]

    def probe():
        # read from worker threads; touches only plain floats
        t = cur[0]
        if theta_cell is not None:
            t = max(t, theta_cell.get())
        return t - EPS

    refresh_theta()
    q_ub = [(-ub[sid], sid) for sid in ub]
    heapq.heapify(q_ub)
    l_ub: dict[int, bool] = {}  # member -> checked
    in_flight: set[int] = set()
    ub_trace: list[float] = []

    def theta_ub():
        if len(l_ub) < k:
            return 0.0
        return min(ub[s] for s in l_ub)

    def refill():
        while len(l_ub) < k and q_ub:
            u, sid = heapq.heappop(q_ub)
            if -u < theta() - EPS:
                if sid not in exact:
                    outcome[sid] = "dropped"
                emit("drop", sid)
                continue
            l_ub[sid] = sid in exact
            emit("admit", sid)
        ub_trace.append(theta_ub())

    def complete(sid, res: MatchOutcome):
        in_flight.discard(sid)
        del l_ub[sid]
        if res.exact:
            stats.em_calls += 1
            outcome[sid] = "exact"
            so = res.score
            exact[sid] = lb[sid] = ub[sid] = so
            l_lb.update(sid, so)
            refresh_theta()
            emit("exact", sid)
            if so >= theta() - EPS:
                heapq.heappush(q_ub, (-so, sid))
                emit("demote", sid)
            else:
                emit("drop", sid)
        else:
            stats.em_early_terminated += 1
            outcome[sid] = "early"
            emit("early", sid)
        refill()

    def next_unchecked():
        best = None
        for sid, checked in l_ub.items():
            if checked or sid in in_flight:
                continue
            key = (-ub[sid], sid)
            if best is None or key < best:
                best = key
        return None if best is None else best[1]

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    futures = {}
    try:
        refill()
        while True:
            if deadline is not None and time.perf_counter() > deadline:
                raise SearchTimeout("verification exceeded the time budget")
            sid = next_unchecked()
            if sid is not None and len(in_flight) < workers:
                if ub[sid] < theta() - EPS:
                    del l_ub[sid]
                    outcome[sid] = "dropped"
                    emit("drop", sid)
                    refill()
                    continue
                if no_em_check(lb[sid], theta_ub()):
                    l_ub[sid] = True
                    outcome[sid] = "no_em"
                    stats.no_em += 1
                    emit("no_em", sid)
                    continue
                in_flight.add(sid)
                emit("dispatch", sid)
                if pool is None:
                    complete(sid, matcher(sid, probe))
                else:
                    futures[pool.submit(matcher, sid, probe)] = sid
                continue
            if not in_flight:
                break
            done, _ = wait(list(futures), return_when=FIRST_COMPLETED)
            for fut in sorted(done, key=lambda f: futures[f]):
                complete(futures.pop(fut), fut.result())
    finally:
        if pool is not None:
            pool.shutdown(wait=True, cancel_futures=True)

    stats.pp_dropped = sum(1 for v in outcome.values() if v == "dropped")
    stats.unverified = len(ub) - len(outcome)

    entries = []
    for sid in l_ub:
        if sid in exact:
            score = exact[sid]
        elif lb[sid] >= ub[sid]:
            score = lb[sid]
        elif score_results:
            score = matcher(sid, lambda: float("-inf")).score
            stats.report_matchings += 1
            l_lb.update(sid, score)
            refresh_theta()
        else:
            score = lb[sid]
        entries.append((sid, score))
    entries.sort(key=lambda p: (-p[1], p[0]))
    stats.postproc_ms = (time.perf_counter() - t0) * 1e3
    return PostResult(entries, stats, ub_trace, outcome)
