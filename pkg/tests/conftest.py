import itertools

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_unit(rng, d, complex_=True):
    v = rng.normal(size=d)
    if complex_:
        v = v + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def subset_index_map(n, ell):
    """tuple(subset) -> row index, matching itertools enumeration order."""
    return {c: i for i, c in enumerate(itertools.combinations(range(n), ell))}


def subset_counts(samples, n, ell):
    """Histogram of sampled subsets over the full enumeration order."""
    index = subset_index_map(n, ell)
    counts = np.zeros(len(index))
    codes = {}
    base = np.array([n**j for j in range(ell)][::-1])
    for key, i in index.items():
        codes[int(np.dot(key, base))] = i
    sample_codes = samples @ base
    for code in sample_codes:
        counts[codes[int(code)]] += 1
    return counts
