import numpy as np
import pytest

from semoverlap.core import Collection
from semoverlap.engine import assignment_score
from semoverlap.index import build_inverted_index
from semoverlap.matching import greedy_matching
from semoverlap.refinement import (BucketIndex, MissingEntry, TopKList, init_candidate, refine,
                                   update_ilb)
from semoverlap.similarity import TableSimilarity, open_token_stream, weight_matrix
from semoverlap.synth import make_workload

from conftest import random_table_instance
from oracles import brute_so, top_k_scores


def encoded(query, sets):
    coll = Collection.from_token_sets(sets)
    return coll, coll.encode_query(query)


class TestInitCandidate:
    def test_disjoint_first_edge(self):
        coll, q = encoded(["q0", "q1", "q2", "q3", "q4"], [["c0", "c1", "c2"]])
        c = coll.sets[0]
        st = init_candidate(c, q, (0, c.elements[0], 0.9))
        assert st.ilb == pytest.approx(0.9)
        assert st.iub(0.9) == pytest.approx(2.7)

    def test_identical_sets(self):
        coll, q = encoded(["a", "b", "c"], [["a", "b", "c"]])
        st = init_candidate(coll.sets[0], q, (0, 0, 1.0))
        assert st.S == 3 and st.m == 0 and st.iub(0.5) == 3

    def test_one_shared_element(self):
        coll, q = encoded(["x", "q1", "q2", "q3"], [["x", "c1", "c2", "c3"]])
        c = coll.sets[0]
        qpos = q.tokens.index("q1")
        st = init_candidate(c, q, (qpos, coll.token_to_id["c1"], 0.85))
        assert st.l == 2 and st.m == 2
        assert st.iub(0.85) == pytest.approx(3.55)
        # on this instance (only these edges exist) the bound holds
        prov = TableSimilarity({("q1", "c1"): 0.85, ("q2", "c2"): 0.85, ("q3", "c3"): 0.85})
        so = brute_so(weight_matrix(q.tokens, coll.tokens_of(c), prov, 0.8))
        assert so <= 3.55 + 1e-9


class TestUpdateILB:
    def test_fresh_edge(self):
        coll, q = encoded(["a", "b"], [["x", "y"]])
        st = init_candidate(coll.sets[0], q)
        update_ilb(st, (0, 2, 0.9))
        assert st.S == pytest.approx(0.9)

    def test_matched_query_ignored(self):
        coll, q = encoded(["a", "b"], [["x", "y"]])
        st = init_candidate(coll.sets[0], q, (0, 2, 0.9))
        update_ilb(st, (0, 3, 0.85))
        assert st.S == pytest.approx(0.9) and st.l == 1

    def test_stream_order_equals_greedy(self):
        prov = TableSimilarity({("a", "x"): 0.95, ("a", "y"): 0.9, ("b", "x"): 0.92,
                                ("b", "z"): 0.81, ("c", "y"): 0.88, ("c", "z"): 0.99})
        coll, q = encoded(["a", "b", "c"], [["x", "y", "z"]])
        c = coll.sets[0]
        stream = open_token_stream(q, prov, coll.dictionary, 0.8)
        st = init_candidate(c, q)
        for tup in stream:
            if tup[1] in c.elements:
                update_ilb(st, tup)
        w = weight_matrix(q.tokens, coll.tokens_of(c), prov, 0.8)
        assert st.S == pytest.approx(greedy_matching(w)[0])

    def test_bound_survives_greedy_lock_in(self):
        # a-x is taken first, so the partial greedy sum stalls at 1.0 while
        # the optimum pairs a-y and b-x for 1.9
        prov = TableSimilarity({("a", "x"): 1.0, ("a", "y"): 0.95, ("b", "x"): 0.95,
                                ("b", "w"): 0.5})
        coll, q = encoded(["a", "b"], [["x", "y"], ["w"]])
        c = coll.sets[0]
        st = init_candidate(c, q)
        for tup in open_token_stream(q, prov, coll.dictionary, 0.4):
            if tup[1] in c.elements:
                update_ilb(st, tup)
            assert st.iub(tup[2]) >= 1.9 - 1e-9
        assert st.S == pytest.approx(1.0)


class TestBuckets:
    def test_prune_example(self):
        b = BucketIndex()
        for sid, s in enumerate([0.1, 0.5, 1.2]):
            b.insert(sid, 2, s)
        assert b.bucket_prune(0.6, 1.4) == [0]
        assert len(b) == 2

    def test_zero_threshold(self):
        b = BucketIndex()
        b.insert(0, 2, 0.0)
        assert b.bucket_prune(0.5, 0.0) == []

    def test_monotone_in_s(self):
        entries = [0.1, 0.3, 0.5, 0.8, 1.2]
        pruned = []
        for s in (0.6, 0.4, 0.2):
            b = BucketIndex()
            for sid, u in enumerate(entries):
                b.insert(sid, 2, u)
            pruned.append(set(b.bucket_prune(s, 1.4)))
        assert pruned[0] <= pruned[1] <= pruned[2]
        assert pruned[0] == {0} and pruned[2] == {0, 1, 2, 3}

    def test_immune_skipped(self):
        b = BucketIndex()
        for sid, u in enumerate([0.1, 0.2, 0.3]):
            b.insert(sid, 0, u)
        assert b.bucket_prune(0.0, 0.25, immune={0}) == [1]
        assert b.buckets[0] == [(0.1, 0), (0.3, 2)]

    def test_move(self):
        b = BucketIndex()
        b.insert(7, 3, 0.5)
        b.bucket_move(7, 3, 0.5, 2, 1.4)
        assert b.buckets == {2: [(1.4, 7)]}

    def test_move_keeps_order(self):
        b = BucketIndex()
        b.insert(1, 2, 0.4)
        b.insert(2, 2, 1.0)
        b.insert(3, 3, 0.2)
        b.bucket_move(3, 3, 0.2, 2, 0.7)
        assert b.buckets[2] == sorted(b.buckets[2]) == [(0.4, 1), (0.7, 3), (1.0, 2)]

    def test_missing(self):
        b = BucketIndex()
        b.insert(1, 2, 0.4)
        with pytest.raises(MissingEntry):
            b.bucket_move(1, 2, 0.5, 1, 0.9)
        with pytest.raises(MissingEntry):
            b.remove(1, 5, 0.4)


class TestTopKList:
    def test_bottom_zero_until_full(self):
        t = TopKList(2)
        t.update(1, 3.0)
        assert t.bottom() == 0.0
        t.update(2, 1.0)
        assert t.bottom() == 1.0

    def test_replace_worst_and_raise(self):
        t = TopKList(2)
        t.update(1, 3.0)
        t.update(2, 1.0)
        assert t.update(3, 2.0) and 2 not in t
        assert t.update(3, 2.5) and t.bottom() == 2.5
        assert not t.update(4, 2.5)
        assert t.members() == [(1, 3.0), (3, 2.5)]


def test_walkthrough_survivors():
    """Seven candidates, k=2. C5 falls to the first threshold; C3 falls once
    C4's lower bound arrives and raises it."""
    s = 0.5
    # sid: (S, m, ub_sum)
    cands = {1: (1.5, 1, 2.0), 2: (1.2, 1, 1.6), 3: (0.5, 1, 0.9), 5: (0.3, 1, 0.5),
             6: (0.9, 2, 1.0), 7: (0.8, 2, 1.0)}
    b, l_lb = BucketIndex(), TopKList(2)
    for sid, (S, m, u) in cands.items():
        b.insert(sid, m, u)
        l_lb.update(sid, S)
    assert l_lb.bottom() == 1.2
    assert b.bucket_prune(s, l_lb.bottom(), l_lb.scores) == [5]
    b.insert(4, 1, 1.9)
    l_lb.update(4, 1.45)
    assert b.bucket_prune(s, l_lb.bottom(), l_lb.scores) == [3]
    survivors = sorted(sid for lst in b.buckets.values() for _, sid in lst)
    assert survivors == [1, 2, 4, 6, 7]


def run_refine(query, coll, prov, k, alpha):
    q = coll.encode_query(query)
    stream = open_token_stream(q, prov, coll.dictionary, alpha)
    return q, refine(q, coll, build_inverted_index(coll), stream, k)


def test_identical_set_k1():
    coll = Collection.from_token_sets([["a", "b", "c"]])
    from semoverlap.similarity import ExactSimilarity
    q, res = run_refine(["a", "b", "c"], coll, ExactSimilarity(), 1, 0.8)
    (st,) = res.survivors
    assert st.S == 3 and st.iub(0.0) == 3


@pytest.mark.parametrize("seed", range(120))
def test_no_false_negatives_and_sandwich(seed):
    query, coll, prov = random_table_instance(seed)
    k = 1 + seed % 4
    alpha = (0.7, 0.8, 0.9)[seed % 3]
    q, res = run_refine(query, coll, prov, k, alpha)
    so = {c.set_id: brute_so(weight_matrix(q.tokens, coll.tokens_of(c), prov, alpha))
          for c in coll.sets}
    kth = top_k_scores(so.values(), k)
    theta_star = kth[-1] if len(kth) == k else 0.0
    alive = {st.set_id for st in res.survivors}
    for sid, v in so.items():
        if v > 0 and v >= theta_star - 1e-9:
            # a pruned set may only tie the k-th score, and k others must reach it
            if sid not in alive:
                assert v <= theta_star + 1e-9
    assert sum(1 for sid in alive if so[sid] >= theta_star - 1e-9) >= len(kth)
    for st in res.survivors:
        assert st.S - 1e-9 <= so[st.set_id] <= st.iub(0.0) + 1e-9
    assert all(b >= a for a, b in zip(res.theta_trace, res.theta_trace[1:]))


@pytest.mark.parametrize("seed", range(8))
def test_workload_refine(seed):
    w = make_workload(seed)
    q, res = run_refine(w.query, w.collection, w.provider, 5, 0.8)
    s = res.stats
    assert s.candidates_seen == len(res.states)
    assert len(res.survivors) == s.candidates_seen - s.iub_pruned - s.pruned_on_arrival
    by_id = {c.set_id: c for c in w.collection.sets}
    for st in res.survivors:
        wm = res.stream.weight_matrix(by_id[st.set_id].elements)
        # continuous similarities: no ties, so the partial sum is the greedy score
        assert st.S == pytest.approx(greedy_matching(wm)[0], abs=1e-9)
        assert st.S <= assignment_score(wm) + 1e-9 <= st.iub(0.0) + 2e-9


def test_bucket_integrity_each_step(monkeypatch):
    """Validate buckets against candidate states before every prune scan."""
    from semoverlap import refinement as mod

    holder = {}
    orig = mod.BucketIndex.bucket_prune
    calls = []

    def checked(self, s, theta, immune=()):
        self.check(holder["res"].states)
        calls.append(s)
        return orig(self, s, theta, immune)

    monkeypatch.setattr(mod.BucketIndex, "bucket_prune", checked)
    w = make_workload(3)
    q = w.collection.encode_query(w.query)
    stream = open_token_stream(q, w.provider, w.collection.dictionary, 0.8)
    res = refine(q, w.collection, build_inverted_index(w.collection), stream, 3,
                 on_state=lambda r: holder.setdefault("res", r))
    assert len(calls) > 3 and calls[-1] == 0.0
    assert res.stats.iub_pruned > 0
