"""Samplable ensembles of k-sparse states and their exact second moments.

Both optimal truncations (trace distance and robustness) produce states of
the same shape: a deterministic prefix of amplitudes on the largest
canonical coordinates plus a constant amplitude on a random fixed-size
subset of a window, all divided by one normalization constant.  This module
holds that shared description, batch sampling, and the assembly of the
exact mixture second moment from the subset marginals.
"""

from dataclasses import dataclass, field

import numpy as np

from .canonical import CanonicalVector
from . import maxent

__all__ = ["SparseEnsemble", "InternalConsistencyError", "sample_state", "sample_states"]


class InternalConsistencyError(RuntimeError):
    """A solver output violated one of its own certified identities."""


@dataclass(frozen=True)
class SparseEnsemble:
    """Description of a random k-sparse state in the canonical basis.

    A draw places ``prefix`` on canonical coordinates ``0..len(prefix)-1``
    and ``window_amp`` on ``det_in`` plus a random size
    ``subset_size - len(det_in)`` subset of ``free``, then divides by
    ``norm_const``.  ``marginals`` are the inclusion probabilities over the
    full ``window`` (deterministic items included at 0/1), summing to
    ``subset_size``.
    """

    canon: CanonicalVector
    kind: str  # "trace" or "robust"
    prefix: np.ndarray
    window: np.ndarray
    window_amp: float
    subset_size: int
    marginals: np.ndarray
    det_in: np.ndarray
    free: np.ndarray
    model: maxent.MaxEntModel | None = field(repr=False)
    norm_const: float

    @property
    def point_mass(self) -> bool:
        return self.window.size == 0

    @property
    def sparsity(self) -> int:
        """Nonzero coordinates of every sampled state."""
        return self.prefix.size + self.subset_size


def sample_states(ens: SparseEnsemble, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` states as rows of a (size, d) array in canonical order."""
    w = np.zeros((size, ens.canon.d))
    w[:, : ens.prefix.size] = ens.prefix
    if ens.det_in.size:
        w[:, ens.det_in] = ens.window_amp
    if ens.model is not None:
        subsets = maxent.sample_sequential_batch(ens.model, rng, size)
        cols = ens.free[subsets]
        w[np.arange(size)[:, None], cols] = ens.window_amp
    w /= ens.norm_const
    return w


def sample_state(ens: SparseEnsemble, rng: np.random.Generator) -> np.ndarray:
    """Draw one state; O(d) after the model's tables are built."""
    return sample_states(ens, rng, 1)[0]


def effective_marginals(ens: SparseEnsemble) -> np.ndarray:
    """Inclusion marginals of the distribution actually sampled.

    Deterministic items contribute exactly 0/1; free items carry the fitted
    model's marginals (equal to the targets within the fit tolerance).
    """
    q = np.zeros(ens.window.size)
    win_pos = {int(j): p for p, j in enumerate(ens.window)}
    for j in ens.det_in:
        q[win_pos[int(j)]] = 1.0
    if ens.model is not None:
        q_free = maxent.marginals(ens.model)
        for val, j in zip(q_free, ens.free):
            q[win_pos[int(j)]] = val
    return q


def second_moment(ens: SparseEnsemble) -> np.ndarray:
    """Unnormalized mixture second moment E[(prefix + amp 1_S)(...)^T].

    Assembled exactly from the sampled distribution's one- and two-element
    marginals; dividing by ``norm_const**2`` gives the mixture density
    matrix.
    """
    d = ens.canon.d
    m = np.zeros((d, d))
    p = ens.prefix.size
    m[:p, :p] = np.outer(ens.prefix, ens.prefix)
    if ens.point_mass:
        return m
    q = effective_marginals(ens)
    w_count = ens.window.size
    big_q = np.zeros((w_count, w_count))
    if ens.model is not None:
        free_pos = np.searchsorted(ens.window, ens.free)
        big_q[np.ix_(free_pos, free_pos)] = maxent.pair_marginals(ens.model)
    if ens.det_in.size:
        det_pos = np.searchsorted(ens.window, ens.det_in)
        big_q[det_pos, :] = q
        big_q[:, det_pos] = q[:, None]
    np.fill_diagonal(big_q, q)
    amp = ens.window_amp
    cross = amp * np.outer(ens.prefix, q)
    m[:p, ens.window] += cross
    m[ens.window, :p] += cross.T
    m[np.ix_(ens.window, ens.window)] += amp**2 * big_q
    return m
