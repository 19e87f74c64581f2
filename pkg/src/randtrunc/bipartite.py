"""Schmidt-rank truncation of bipartite states via the coefficient vector.

The optimal rank-k approximation problems for a bipartite pure state reduce
to the k-sparse problems for its vector of Schmidt coefficients; the
solvers run on that vector and samples are lifted back through the Schmidt
bases.
"""

from dataclasses import dataclass

import numpy as np

from .canonical import CanonicalVector, InvalidInputError, canonicalize, k_support_norm
from .ensemble import SparseEnsemble, sample_state
from . import robust, tracedist

__all__ = ["BipartiteState", "schmidt_decompose", "solve_entangled", "sample_low_rank_state"]

RANK_THRESHOLD = 1e-14


@dataclass(frozen=True)
class BipartiteState:
    """A bipartite pure state with its singular value decomposition.

    ``matrixized`` is the a-by-b coefficient matrix; ``schmidt`` holds the
    nonincreasing coefficients (values below 1e-14 are zeroed for rank
    purposes) and ``matrixized == left @ diag(schmidt) @ right.conj().T``.
    ``renormalized`` flags inputs whose norm was off by more than 1e-6.
    """

    a: int
    b: int
    matrixized: np.ndarray
    schmidt: np.ndarray
    left_basis: np.ndarray
    right_basis: np.ndarray
    renormalized: bool

    @property
    def schmidt_rank(self) -> int:
        return int(np.count_nonzero(self.schmidt > 0.0))


def schmidt_decompose(coefficients, a: int, b: int) -> BipartiteState:
    """Decompose a length a*b coefficient vector across the (a, b) cut."""
    v = np.asarray(coefficients, dtype=complex).ravel()
    if v.size != a * b:
        raise InvalidInputError(f"expected {a * b} coefficients, got {v.size}")
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise InvalidInputError("zero state has no Schmidt decomposition")
    renormalized = abs(norm - 1.0) > 1e-6
    matrix = (v / norm).reshape(a, b)
    left, s, vh = np.linalg.svd(matrix, full_matrices=False)
    s = np.where(s > RANK_THRESHOLD, s, 0.0)
    return BipartiteState(
        a=a, b=b, matrixized=matrix, schmidt=s, left_basis=left,
        right_basis=vh.conj().T, renormalized=renormalized,
    )


def solve_entangled(state: BipartiteState, k: int, mode: str = "trace"):
    """Optimal Schmidt-rank-k approximation value and its ensemble.

    ``mode`` selects trace distance or robustness; the value and the
    ensemble come from running the corresponding k-sparse solver on the
    Schmidt coefficient vector.  Returns ``(value, ensemble)`` where the
    ensemble indexes Schmidt modes in canonical (sorted) order.
    """
    if not 1 <= k <= min(state.a, state.b):
        raise InvalidInputError(f"k must satisfy 1 <= k <= {min(state.a, state.b)}, got {k}")
    canon = canonicalize(state.schmidt)
    if mode == "trace":
        sol = tracedist.solve(canon, k)
        return sol.lam, tracedist.build_ensemble(sol, canon)
    if mode == "robust":
        value = max(k_support_norm(canon, k).value ** 2 - 1.0, 0.0)
        return value, robust.build_ensemble(canon, k)
    raise InvalidInputError(f"mode must be 'trace' or 'robust', got {mode!r}")


def sample_low_rank_state(
    state: BipartiteState, ens: SparseEnsemble, rng: np.random.Generator
) -> np.ndarray:
    """Draw a Schmidt-rank <= k state, returned as a length a*b vector.

    The sampled sparse coefficient vector is installed on the target's
    Schmidt bases: sum_i w_i x_i (x) y_i.
    """
    w = sample_state(ens, rng)
    matrix = (state.left_basis * w) @ state.right_basis.conj().T
    return matrix.ravel()
