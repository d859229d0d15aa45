"""Exact top-k set search under semantic overlap."""
from .core import (EPS, CandidateSet, Collection, ParseError, QuerySet, SearchParams,
                   SearchTimeout, SemOverlapError, TooFewResultsWarning, apply_threshold,
                   vanilla_overlap)
from .engine import SearchResult, baseline_search, partition, search
from .matching import MatchOutcome, exact_so, greedy_matching, hungarian_so, lower_bound, max_edge
from .similarity import (CosineEmbedding, ExactSimilarity, QGramJaccard, TableSimilarity,
                         make_provider)

__all__ = [
    "EPS", "CandidateSet", "Collection", "ParseError", "QuerySet", "SearchParams",
    "SearchTimeout", "SemOverlapError", "TooFewResultsWarning", "apply_threshold",
    "vanilla_overlap", "SearchResult", "baseline_search", "partition", "search",
    "MatchOutcome", "exact_so", "greedy_matching", "hungarian_so", "lower_bound", "max_edge",
    "CosineEmbedding", "ExactSimilarity", "QGramJaccard", "TableSimilarity", "make_provider",
]
