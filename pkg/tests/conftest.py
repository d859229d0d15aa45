import itertools
import random

import numpy as np
import pytest
from hypothesis import settings

from semoverlap import matching
from semoverlap.core import Collection
from semoverlap.similarity import TableSimilarity

settings.register_profile("default", max_examples=100, deadline=None)
settings.load_profile("default")

# Check label feasibility after every Hungarian labelling update.
matching.CHECK_LABELS = True

CITY_PAIRS = {
    ("Blaine", "Blain"): 0.99,
    ("BigApple", "NewYorkCity"): 0.9,
    ("BigApple", "Manhattan"): 0.8,
    ("BigApple", "Albany"): 0.7,
    ("BigApple", "Appleton"): 0.3,
    ("Charleston", "SC"): 0.85,
    ("Charleston", "Savannah"): 0.7,
    ("Columbia", "SC"): 0.8,
    ("Columbia", "NewYorkCity"): 0.75,
    ("Columbia", "Greenville"): 0.7,
}
CITY_QUERY = ["LA", "Blaine", "BigApple", "Charleston", "Columbia"]
CITY_C1 = ["LA", "Blain", "Appleton", "Savannah", "Greenville", "Albany"]
CITY_C2 = ["LA", "Blain", "NewYorkCity", "SC", "Manhattan"]


@pytest.fixture
def city_example():
    prov = TableSimilarity(CITY_PAIRS)
    coll = Collection.from_token_sets([CITY_C1, CITY_C2])
    return CITY_QUERY, coll, prov


def random_table_instance(seed, n_vocab=(3, 15), n_sets=(1, 25), max_card=6, max_q=5,
                          values=(0.5, 0.7, 0.8, 0.8, 0.9, 1.0), density=0.4):
    """Small random instance with heavy similarity ties and OOV query tokens."""
    rng = random.Random(seed)
    vocab = [f"t{i}" for i in range(rng.randint(*n_vocab))]
    pairs = {(a, b): rng.choice(values) for a, b in itertools.combinations(vocab, 2)
             if rng.random() < density}
    sets = [rng.sample(vocab, rng.randint(1, min(max_card, len(vocab))))
            for _ in range(rng.randint(*n_sets))]
    query = rng.sample(vocab + ["oov1", "oov2"], rng.randint(1, max_q))
    return query, Collection.from_token_sets(sets), TableSimilarity(pairs)


def random_matrix(rng: np.random.Generator, max_n=7, alpha=0.8, zero_p=0.4):
    r, c = rng.integers(1, max_n + 1, size=2)
    w = rng.uniform(0, 1, size=(r, c))
    w[rng.random((r, c)) < zero_p] = 0.0
    w[w < alpha] = 0.0
    return w


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import REPORT
    except ImportError:
        return
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
