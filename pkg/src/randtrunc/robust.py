"""Robustness-optimal mixed approximation by k-sparse states.

The optimal value is the k-support norm squared minus one; this module
builds the matching ensemble (keep the top entries, spread the tail sum
over a random subset at a constant amplitude), assembles its density
matrix, and certifies optimality through the diagonal-dominance structure
of the difference ``(1+R) tau - vv^T``.
"""

from dataclasses import dataclass

import numpy as np

from .canonical import CanonicalVector, DensityMatrix, InvalidInputError, k_support_norm, tail_sums
from .ensemble import InternalConsistencyError, SparseEnsemble, sample_state, sample_states, second_moment
from .tracedist import _assemble

__all__ = [
    "DeltaCertificate",
    "build_ensemble",
    "density_matrix",
    "sample_state",
    "sample_states",
]

_FIT_TOL = 1e-12


@dataclass(frozen=True)
class DeltaCertificate:
    """Diagonal-dominance witness for ``(1+R) tau - vv^T``.

    A valid construction has nonnegative diagonal (within 1e-12),
    nonpositive off-diagonal (within 1e-12), and rows summing to zero
    (within 1e-10); such a matrix is proportional to a 2-sparse mixture,
    which certifies the robustness value.
    """

    min_diag: float
    max_offdiag: float
    max_abs_rowsum: float

    @property
    def ok(self) -> bool:
        return (
            self.min_diag >= -1e-12
            and self.max_offdiag <= 1e-12
            and self.max_abs_rowsum <= 1e-10
        )


def build_ensemble(canon: CanonicalVector, k: int, fit_tol: float = _FIT_TOL) -> SparseEnsemble:
    """Ensemble attaining the robustness-optimal mixture.

    The window spans everything from position ``k - r - 1`` (0-based) to
    the end of the support at the constant amplitude ``s_{k-r} / (r+1)``,
    with inclusion marginals proportional to the entries.  Targets with
    support at most ``k`` give the point mass on themselves.  The same
    construction is used for k = 1 (empty prefix, singleton subsets); the
    certificate check in ``density_matrix`` validates that extension at
    runtime.
    """
    d = canon.d
    if not 1 <= k <= d:
        raise InvalidInputError(f"k must satisfy 1 <= k <= {d}, got {k}")
    v = canon.values
    d0 = canon.support_size
    empty = np.zeros(0, dtype=np.int64)
    if d0 <= k:
        return SparseEnsemble(
            canon=canon, kind="robust", prefix=v[:d0].copy(), window=empty,
            window_amp=0.0, subset_size=0, marginals=np.zeros(0), det_in=empty,
            free=empty, model=None, norm_const=1.0,
        )
    ks = k_support_norm(canon, k)
    r = ks.r
    s = tail_sums(canon).s
    amp = s[k - r - 1] / (r + 1)
    window = np.arange(k - r - 1, d0, dtype=np.int64)
    q = v[window] / amp
    if abs(q.sum() - (r + 1)) > 1e-8:
        raise InternalConsistencyError(
            f"window marginals sum to {q.sum()!r}, expected {r + 1}"
        )
    q = np.clip(q, 0.0, 1.0)
    prefix = v[: k - r - 1].copy()
    return _assemble(canon, "robust", prefix, window, amp, r + 1, q, ks.value, fit_tol)


def density_matrix(ens: SparseEnsemble) -> tuple[DensityMatrix, DeltaCertificate]:
    """Density matrix of the robustness ensemble with its witness.

    Raises
    ------
    InternalConsistencyError
        If the diagonal-dominance certificate fails beyond tolerance.
    """
    moment = second_moment(ens)
    tau = moment / ens.norm_const**2
    v = ens.canon.values
    delta = moment - np.outer(v, v)
    diag = np.diag(delta)
    off = delta - np.diag(diag)
    cert = DeltaCertificate(
        min_diag=float(diag.min()),
        max_offdiag=float(off.max()),
        max_abs_rowsum=float(np.abs(delta.sum(axis=1)).max()),
    )
    if not cert.ok:
        raise InternalConsistencyError(f"diagonal-dominance certificate failed: {cert}")
    return DensityMatrix(tau), cert
