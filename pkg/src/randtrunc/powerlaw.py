"""Power-law target states and the trace-distance advantage sweep.

States with entries proportional to i^(-gamma) interpolate between the
uniform state and nearly-sparse ones; sweeping the sparsity level and
fitting log(T_k) against log(eps) measures how much randomized truncation
beats the deterministic error sqrt(eps).
"""

from dataclasses import dataclass

import numpy as np

from .canonical import CanonicalVector, InvalidInputError, canonicalize, robustness_k, top_k_norm
from . import tracedist

__all__ = ["SweepRow", "powerlaw_vector", "powerlaw_sweep", "fit_exponent"]


def powerlaw_vector(d: int, gamma: float) -> CanonicalVector:
    """Normalized vector with entries i^(-gamma), i = 1..d."""
    if d < 2:
        raise InvalidInputError(f"need d >= 2, got {d}")
    if gamma < 0:
        raise InvalidInputError(f"need gamma >= 0, got {gamma}")
    return canonicalize(np.arange(1, d + 1, dtype=float) ** (-gamma))


@dataclass(frozen=True)
class SweepRow:
    """One sweep point: deterministic error and both optimal values."""

    gamma: float
    d: int
    k: int
    epsilon: float
    t_k: float
    r_k: float
    fitted_exponent: float


def fit_exponent(epsilons, t_values, n_points: int = 10) -> float:
    """Least-squares slope of log(T_k) against log(eps).

    Uses the ``n_points`` smallest positive epsilon values; finite-size
    drift dominates elsewhere.
    """
    eps = np.asarray(epsilons, dtype=float)
    tv = np.asarray(t_values, dtype=float)
    good = (eps > 0) & (tv > 0)
    eps, tv = eps[good], tv[good]
    if eps.size < 2:
        raise InvalidInputError("need at least two positive sweep points")
    order = np.argsort(eps)[: min(n_points, eps.size)]
    x = np.log(eps[order])
    y = np.log(tv[order])
    slope = np.polyfit(x, y, 1)[0]
    return float(slope)


def powerlaw_sweep(d: int, gammas, k_values, n_fit_points: int = 10) -> list:
    """Sweep (gamma, k) points and attach the fitted exponent per gamma."""
    rows = []
    k_values = sorted(set(int(k) for k in k_values))
    for gamma in gammas:
        canon = powerlaw_vector(d, gamma)
        eps_list, t_list, partial = [], [], []
        for k in k_values:
            eps = max(1.0 - top_k_norm(canon, k) ** 2, 0.0)
            t_k = tracedist.solve(canon, k).lam
            r_k = robustness_k(canon, k)
            eps_list.append(eps)
            t_list.append(t_k)
            partial.append((k, eps, t_k, r_k))
        exponent = fit_exponent(eps_list, t_list, n_points=n_fit_points)
        for k, eps, t_k, r_k in partial:
            rows.append(SweepRow(
                gamma=float(gamma), d=d, k=k, epsilon=eps, t_k=t_k, r_k=r_k,
                fitted_exponent=exponent,
            ))
    return rows
