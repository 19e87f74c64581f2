"""Randomized truncation of vectors to sparse or low-Schmidt-rank ensembles.

Submodules
----------
canonical   canonical vector form, top-k / k-support norms, trace distance
maxent      max-entropy (conditional Poisson) subset distributions
tracedist   optimal trace-distance truncation and its samplable ensemble
robust      robustness-optimal truncation and the diagonal-dominance witness
bipartite   Schmidt reduction of bipartite states to the coefficient problem
mpslab      matrix-product-state harness for randomized bond truncation
oracle      brute-force and Monte Carlo cross-checks used by the test suite
powerlaw    power-law target states and the advantage-exponent sweep
cli         command-line interface
"""

from . import canonical, maxent, tracedist, robust, bipartite, mpslab, oracle, powerlaw

__all__ = [
    "canonical",
    "maxent",
    "tracedist",
    "robust",
    "bipartite",
    "mpslab",
    "oracle",
    "powerlaw",
]

__version__ = "0.1.0"
