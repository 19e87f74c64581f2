"""Canonical vector form and the distance measures driving sparse truncation.

A complex target vector is reduced to its canonical form: sorted nonnegative
magnitudes, the permutation that sorted them, and the unit phases stripped
from the original coordinates.  Every downstream solver works on the sorted
magnitudes only; phases and ordering are reintroduced at the end.

The module also provides the two dual norms that control truncation quality
(the top-k norm and the k-support norm), the derived fidelity/robustness
values, and the trace distance between density matrices.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "CanonicalVector",
    "TailSums",
    "KSupportResult",
    "DensityMatrix",
    "InvalidInputError",
    "canonicalize",
    "restore",
    "tail_sums",
    "top_k_norm",
    "k_support_norm",
    "fidelity_k",
    "robustness_k",
    "trace_distance",
]

UNIT_NORM_TOL = 1e-12


class InvalidInputError(ValueError):
    """An input vector or matrix violates a precondition."""


@dataclass(frozen=True)
class CanonicalVector:
    """A unit vector factored into sorted magnitudes, permutation and phases.

    ``values`` holds the magnitudes in nonincreasing order with unit 2-norm.
    ``perm[i]`` is the original index of the magnitude at canonical position
    ``i``; ``phases`` are the unit-modulus phases of the *original*
    coordinates (phase 1 for zero entries).  The factorization satisfies
    ``restore(values, self) == v / ||v||``.
    """

    values: np.ndarray
    perm: np.ndarray
    phases: np.ndarray

    @property
    def d(self) -> int:
        return self.values.size

    @property
    def support_size(self) -> int:
        """Number of strictly positive magnitudes."""
        return int(np.count_nonzero(self.values > 0.0))


@dataclass(frozen=True)
class TailSums:
    """Suffix sums of the sorted magnitudes.

    ``s[j] = sum(values[j:])`` for 0-based ``j``, with ``s[d] = 0``.  In the
    1-based convention used by the windowing formulas this is ``s_j =
    s[j-1]``.
    """

    s: np.ndarray


@dataclass(frozen=True)
class KSupportResult:
    """Value of the k-support norm and the window size index ``r`` it used."""

    value: float
    r: int


def canonicalize(v) -> CanonicalVector:
    """Factor a nonzero complex vector into canonical form, renormalizing.

    Sorting is stable: equal magnitudes keep their original relative order,
    so the permutation is deterministic.  Zero entries are retained at the
    tail with phase 1.

    Raises
    ------
    InvalidInputError
        If the vector is all-zero or contains non-finite entries.
    """
    v = np.asarray(v, dtype=complex).ravel()
    if v.size == 0 or not np.all(np.isfinite(v)):
        raise InvalidInputError("input vector must be nonempty with finite entries")
    mag = np.abs(v)
    norm = np.linalg.norm(mag)
    if norm == 0.0:
        raise InvalidInputError("input vector must be nonzero")
    phases = np.where(mag > 0.0, v / np.where(mag > 0.0, mag, 1.0), 1.0 + 0.0j)
    perm = np.argsort(-mag, kind="stable")
    values = mag[perm] / norm
    return CanonicalVector(values=values, perm=perm, phases=phases)


def restore(w, canon: CanonicalVector) -> np.ndarray:
    """Map a real vector in canonical order back to the original basis.

    Inverts the permutation and reattaches phases, so
    ``restore(canon.values, canon)`` reproduces the normalized input.
    """
    w = np.asarray(w)
    if w.shape != (canon.d,):
        raise InvalidInputError(f"expected length {canon.d}, got shape {w.shape}")
    out = np.zeros(canon.d, dtype=complex)
    out[canon.perm] = w
    out *= canon.phases
    return out


def tail_sums(canon: CanonicalVector) -> TailSums:
    """Suffix sums s[j] = values[j] + ... + values[d-1], plus s[d] = 0."""
    s = np.zeros(canon.d + 1)
    s[:-1] = np.cumsum(canon.values[::-1])[::-1]
    return TailSums(s=s)


def _sorted_magnitudes(x) -> np.ndarray:
    if isinstance(x, CanonicalVector):
        return x.values
    m = np.abs(np.asarray(x, dtype=complex).ravel())
    m[::-1].sort()
    return m


def top_k_norm(x, k: int) -> float:
    """Euclidean norm of the k largest magnitudes.

    For a unit canonical vector this is the best fidelity achievable by a
    k-sparse pure state.  Accepts a ``CanonicalVector`` or a raw array
    (raw arrays are *not* renormalized).
    """
    values = _sorted_magnitudes(x)
    _check_k(k, values.size)
    return float(np.sqrt(np.sum(values[:k] ** 2)))


def k_support_norm(x, k: int) -> KSupportResult:
    """The dual norm of the top-k norm, by the closed-form window scan.

    value^2 = sum(values[:k-r-1]^2) + s_{k-r}^2 / (r+1) where r in
    {0, ..., k-1} is the unique index with
    values[k-r-2] > s_{k-r}/(r+1) >= values[k-r-1] (0-based; left bound
    +inf at r = k-1).  The scan is linear in r; under exact ties the
    smallest satisfying r is reported.
    """
    values = _sorted_magnitudes(x)
    d = values.size
    _check_k(k, d)
    s = np.zeros(d + 1)
    s[:-1] = np.cumsum(values[::-1])[::-1]
    r = _k_support_r(values, s, k)
    prefix = float(np.sum(values[: k - r - 1] ** 2))
    value2 = prefix + s[k - r - 1] ** 2 / (r + 1)
    return KSupportResult(value=float(np.sqrt(value2)), r=r)


def _k_support_r(values: np.ndarray, s: np.ndarray, k: int) -> int:
    d = values.size
    for r in range(k):
        left = np.inf if k - r - 2 < 0 else values[k - r - 2]
        mid = s[k - r - 1] / (r + 1)
        right = values[k - r - 1] if k - r - 1 < d else 0.0
        if left > mid >= right:
            return r
    # Exact arithmetic guarantees a unique r; allow fp slack at the
    # boundaries before giving up.
    tol = 1e-12 * max(1.0, values[0])
    for r in range(k):
        left = np.inf if k - r - 2 < 0 else values[k - r - 2]
        mid = s[k - r - 1] / (r + 1)
        right = values[k - r - 1] if k - r - 1 < d else 0.0
        if left > mid - tol and mid >= right - tol:
            return r
    raise RuntimeError("no window index satisfied the k-support condition")


def fidelity_k(canon: CanonicalVector, k: int) -> float:
    """Best fidelity with a k-sparse state: the top-k norm."""
    return top_k_norm(canon, k)


def robustness_k(canon: CanonicalVector, k: int) -> float:
    """Robustness against k-sparse mixtures: k-support norm squared minus 1."""
    res = k_support_norm(canon, k)
    return max(res.value**2 - 1.0, 0.0)


def _check_k(k: int, d: int) -> None:
    if not 1 <= k <= d:
        raise InvalidInputError(f"k must satisfy 1 <= k <= {d}, got {k}")


@dataclass(frozen=True)
class DensityMatrix:
    """Dense Hermitian unit-trace matrix, validated on construction.

    Tolerances: Hermiticity 1e-12, trace 1e-10, smallest eigenvalue
    >= -1e-10.
    """

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InvalidInputError("density matrix must be square")
        if np.abs(a - a.conj().T).max() > 1e-12:
            raise InvalidInputError("density matrix must be Hermitian within 1e-12")
        if abs(np.trace(a).real - 1.0) > 1e-10:
            raise InvalidInputError("density matrix must have unit trace within 1e-10")
        if np.linalg.eigvalsh(a)[0] < -1e-10:
            raise InvalidInputError("density matrix must be PSD within 1e-10")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


def _as_matrix(x) -> np.ndarray:
    return x.entries if isinstance(x, DensityMatrix) else np.asarray(x)


def trace_distance(rho, sigma) -> float:
    """Half the sum of absolute eigenvalues of (rho - sigma).

    Both arguments may be ``DensityMatrix`` instances or plain Hermitian
    arrays of equal dimension.
    """
    a = _as_matrix(rho)
    b = _as_matrix(sigma)
    if a.shape != b.shape:
        raise InvalidInputError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(a - b))))
