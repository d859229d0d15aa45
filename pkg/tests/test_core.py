import pytest
from hypothesis import given, strategies as st

from semoverlap.core import (CandidateSet, Collection, SearchParams, apply_threshold,
                             vanilla_overlap)
from semoverlap.matching import exact_so
from semoverlap.similarity import TableSimilarity

from conftest import random_table_instance


class TestApplyThreshold:
    def test_above_alpha_kept(self):
        assert apply_threshold(0.85, 0.8) == 0.85

    def test_below_alpha_zeroed(self):
        assert apply_threshold(0.79, 0.8) == 0.0

    def test_identity(self):
        assert apply_threshold(1.0, 0.8) == 1.0

    @given(st.floats(0, 1), st.floats(0.01, 1))
    def test_range(self, x, alpha):
        y = apply_threshold(x, alpha)
        assert y == 0.0 or alpha <= y <= 1


class TestVanillaOverlap:
    def test_identical(self):
        assert vanilla_overlap({1, 2, 3}, {1, 2, 3}) == 3

    def test_disjoint(self):
        assert vanilla_overlap({1, 2}, {3, 4}) == 0

    def test_partial(self):
        assert vanilla_overlap({1, 2, 3}, {2, 3, 4}) == 2

    @given(st.sets(st.integers(0, 30)), st.sets(st.integers(0, 30)))
    def test_symmetric(self, a, b):
        assert vanilla_overlap(a, b) == vanilla_overlap(b, a)
        assert vanilla_overlap(a, a) == len(a)

    @pytest.mark.parametrize("seed", range(60))
    def test_lower_bounds_semantic_overlap(self, seed):
        q, coll, prov = random_table_instance(seed)
        qs = coll.encode_query(q)
        for c in coll.sets:
            so = exact_so(q, coll.tokens_of(c), prov, 0.7)
            assert vanilla_overlap(qs, c) <= so + 1e-9


class TestCollection:
    def test_ids_dense_first_seen(self):
        coll = Collection.from_token_sets([["b", "a", "b"], ["c", "a"]])
        assert coll.dictionary == ["b", "a", "c"]
        assert [c.elements for c in coll.sets] == [(0, 1), (1, 2)]
        assert coll.element_count == [1, 2, 1]

    def test_empty_sets_skipped(self):
        coll = Collection.from_token_sets([[], ["x"]])
        assert len(coll) == 1 and coll.sets[0].set_id == 0

    def test_encode_query_oov(self):
        coll = Collection.from_token_sets([["a", "b"]])
        q = coll.encode_query(["zz", "b", "b", "a"])
        assert q.ids == (0, 1, 2)
        assert q.tokens == ("a", "b", "zz")
        assert q.raw_strings == ("zz",)
        assert not q.in_dictionary(2)

    def test_candidate_set_rejects_unsorted(self):
        with pytest.raises(ValueError):
            CandidateSet(0, (2, 1))
        with pytest.raises(ValueError):
            CandidateSet(0, ())

    def test_from_encoded_checks_ids(self):
        with pytest.raises(ValueError):
            Collection.from_encoded(["a"], [[0, 1]])

    def test_subset_keeps_ids(self):
        coll = Collection.from_token_sets([["a"], ["b"], ["c"]])
        sub = coll.subset([2, 0])
        assert [c.set_id for c in sub.sets] == [2, 0]
        assert sub.dictionary is coll.dictionary


class TestSearchParams:
    def test_defaults(self):
        p = SearchParams()
        assert (p.k, p.alpha, p.partitions) == (10, 0.8, 10)

    @pytest.mark.parametrize("kw", [{"k": 0}, {"alpha": 0}, {"alpha": 1.5}, {"partitions": 0},
                                    {"workers": 0}, {"timeout_seconds": -1}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SearchParams(**kw)


def test_table_provider_is_symmetric():
    p = TableSimilarity({("a", "b"): 0.8})
    assert p.sim("b", "a") == p.sim("a", "b") == 0.8
    assert p.sim("a", "a") == 1.0
