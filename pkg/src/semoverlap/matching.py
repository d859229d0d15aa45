"""Bipartite matching kernels over similarity matrices.

Rows are query elements, columns candidate elements, entries the thresholded
similarity (exact zeros below alpha). Because all weights are non-negative, the
best optional one-to-one matching equals the best matching that saturates the
smaller side, which is what the Kuhn-Munkres routine below computes. That is
the same value zero-padding the matrix to a square would give.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import CandidateSet, QuerySet
from .similarity import SimilarityProvider, weight_matrix

TIGHT = 1e-12

# Set to True (tests do) to assert label feasibility after every update.
CHECK_LABELS = False


@dataclass(frozen=True)
class MatchOutcome:
    exact: bool
    value: float
    pairs: tuple[tuple[int, int], ...] = ()

    @classmethod
    def exact_score(cls, score, pairs=()):
        return cls(True, float(score), tuple(pairs))

    @classmethod
    def early_terminated(cls, bound):
        return cls(False, float(bound))

    @property
    def score(self) -> float:
        if not self.exact:
            raise ValueError("matching was terminated early; only a bound is known")
        return self.value


def greedy_matching(w) -> tuple[float, list[tuple[int, int]]]:
    """Repeatedly take the heaviest edge between unmatched nodes.

    Ties go to the smaller (row, col) pair.
    """
    w = np.asarray(w, dtype=float)
    if w.size == 0:
        return 0.0, []
    rows, cols = np.nonzero(w > 0)
    order = np.lexsort((cols, rows, -w[rows, cols]))
    used_r, used_c = set(), set()
    total = 0.0
    pairs = []
    for idx in order:
        i, j = int(rows[idx]), int(cols[idx])
        if i in used_r or j in used_c:
            continue
        used_r.add(i)
        used_c.add(j)
        total += w[i, j]
        pairs.append((i, j))
    return float(total), pairs


def max_edge(w) -> float:
    w = np.asarray(w, dtype=float)
    return float(w.max()) if w.size else 0.0


def lower_bound(w) -> float:
    return max(max_edge(w), greedy_matching(w)[0])


def hungarian_so(w, theta_lb: float | None = None,
                 theta_probe: Callable[[], float] | None = None) -> MatchOutcome:
    """Maximum-weight matching with optional label-sum early termination.

    Starts from feasible labels (row maxima on the smaller side, zeros on the
    other) and keeps them feasible. The label sum is an upper bound on the
    optimum that only decreases; it is compared against the termination
    threshold at the start and after every labelling update, and the routine
    gives up as soon as the bound drops below it. The threshold is
    ``max(theta_lb, theta_probe())``, re-read at every check.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 2:
        raise ValueError("weight matrix must be two-dimensional")
    if w.size == 0:
        return MatchOutcome.exact_score(0.0)
    transposed = w.shape[0] > w.shape[1]
    a = w.T if transposed else w
    n, m = a.shape

    def threshold():
        t = theta_lb
        if theta_probe is not None:
            p = theta_probe()
            t = p if t is None else max(t, p)
        return t

    lx = a.max(axis=1)
    ly = np.zeros(m)
    col_match = np.full(m, -1, dtype=np.int64)
    row_match = np.full(n, -1, dtype=np.int64)

    def early():
        t = threshold()
        if t is None:
            return None
        bound = float(lx.sum() + ly.sum())
        return bound if bound < t else None

    b = early()
    if b is not None:
        return MatchOutcome.early_terminated(b)

    for root in range(n):
        if lx[root] <= 0:
            # an all-zero row adds nothing to any matching
            continue
        in_s = np.zeros(n, dtype=bool)
        in_t = np.zeros(m, dtype=bool)
        in_s[root] = True
        slack = lx[root] + ly - a[root]
        slack_row = np.full(m, root, dtype=np.int64)
        while True:
            free = ~in_t
            tight = np.flatnonzero(free & (slack <= TIGHT))
            if tight.size == 0:
                delta = slack[free].min()
                lx[in_s] -= delta
                ly[in_t] += delta
                slack[free] -= delta
                if CHECK_LABELS:
                    _assert_feasible(a, lx, ly)
                b = early()
                if b is not None:
                    return MatchOutcome.early_terminated(b)
                tight = np.flatnonzero(free & (slack <= TIGHT))
            j = int(tight[0])
            in_t[j] = True
            i2 = int(col_match[j])
            if i2 < 0:
                while j >= 0:
                    r = int(slack_row[j])
                    prev = int(row_match[r])
                    col_match[j] = r
                    row_match[r] = j
                    j = prev
                break
            in_s[i2] = True
            cand = lx[i2] + ly - a[i2]
            better = (cand < slack) & ~in_t
            slack[better] = cand[better]
            slack_row[better] = i2

    pairs = []
    total = 0.0
    for r in range(n):
        c = int(row_match[r])
        if c >= 0 and a[r, c] > 0:
            total += a[r, c]
            pairs.append((c, r) if transposed else (r, c))
    pairs.sort()
    return MatchOutcome.exact_score(total, pairs)


def _assert_feasible(a, lx, ly):
    assert np.all(lx[:, None] + ly[None, :] >= a - 1e-9), "infeasible labelling"
    assert np.all(ly >= -1e-12), "negative column label"


def exact_so(q: QuerySet | Sequence[str], c: CandidateSet | Sequence[str],
             provider: SimilarityProvider, alpha: float, *, dictionary=None,
             cache=None) -> float:
    """Semantic overlap of two sets of elements.

    Accepts token sequences directly, or encoded sets plus the dictionary.
    With a token-stream cache the matrix is read from it instead of calling
    the provider.
    """
    if cache is not None and isinstance(c, CandidateSet):
        w = cache.weight_matrix(c.elements)
    else:
        qt = q.tokens if isinstance(q, QuerySet) else list(q)
        if isinstance(c, CandidateSet):
            if dictionary is None:
                raise ValueError("an encoded candidate set needs the dictionary")
            ct = [dictionary[e] for e in c.elements]
        else:
            ct = list(c)
        w = weight_matrix(qt, ct, provider, alpha)
    return hungarian_so(w).score
