"""Independent brute-force and Monte Carlo cross-checks.

Everything here recomputes quantities by routes deliberately different from
the production solvers: subset distributions by explicit enumeration, the
optimal trace distance by projected subgradient ascent over measurement
vectors, and ensemble moments by sampling.  The test suite and the
``--oracle`` CLI flag compare the two routes.
"""

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .canonical import CanonicalVector, InvalidInputError, canonicalize, trace_distance
from .ensemble import SparseEnsemble, sample_states, second_moment

__all__ = [
    "EnumeratedMaxEnt",
    "MomentReport",
    "enumerate_maxent",
    "brute_force_Tk",
    "monte_carlo_moments",
]

_ENUM_LIMIT = 20


@dataclass(frozen=True)
class EnumeratedMaxEnt:
    """Exact subset distribution with its marginals.

    ``subsets`` lists all size-ell subsets as rows; ``probs`` are their
    probabilities.  When fitted to target marginals, ``mu`` holds the dual
    weights and ``dual_gap`` the final gradient norm of the descent.
    """

    n: int
    ell: int
    subsets: np.ndarray
    probs: np.ndarray
    q: np.ndarray
    big_q: np.ndarray
    mu: np.ndarray
    dual_gap: float

    @property
    def entropy(self) -> float:
        p = self.probs[self.probs > 0]
        return float(-np.sum(p * np.log(p)))


def _enumerate_tables(n: int, ell: int):
    subsets = np.array(list(itertools.combinations(range(n), ell)), dtype=np.int64)
    indicators = np.zeros((subsets.shape[0], n))
    indicators[np.arange(subsets.shape[0])[:, None], subsets] = 1.0
    return subsets, indicators


def _distribution_from_mu(mu, indicators):
    log_unnorm = -indicators @ mu
    log_z = logsumexp(log_unnorm)
    return np.exp(log_unnorm - log_z), float(log_z)


def enumerate_maxent(ell: int, mu=None, q_target=None) -> EnumeratedMaxEnt:
    """Exact max-entropy subset distribution by full enumeration.

    Provide either the weights ``mu`` (evaluate their distribution) or the
    target marginals ``q_target`` (solve the dual by exact-gradient descent
    with enumerated gradients, to marginal residual 1e-12).  Only feasible
    for n <= 20.
    """
    if (mu is None) == (q_target is None):
        raise InvalidInputError("provide exactly one of mu and q_target")
    ref = mu if mu is not None else q_target
    n = np.asarray(ref).size
    if n > _ENUM_LIMIT:
        raise InvalidInputError(f"enumeration supports n <= {_ENUM_LIMIT}, got {n}")
    if not 1 <= ell <= n:
        raise InvalidInputError(f"ell must satisfy 1 <= ell <= {n}, got {ell}")
    subsets, indicators = _enumerate_tables(n, ell)

    if mu is not None:
        mu = np.asarray(mu, dtype=float).ravel()
        dual_gap = np.nan
    else:
        q_t = np.asarray(q_target, dtype=float).ravel()
        mu = np.log((1.0 - q_t) / q_t)
        # Newton steps on the dual with enumerated (exact) gradients and
        # covariance, damped by halving until the objective decreases.
        for _ in range(200):
            p, log_z = _distribution_from_mu(mu, indicators)
            q = p @ indicators
            grad = q_t - q
            if np.abs(grad).max() <= 1e-12:
                break
            cov = indicators.T @ (indicators * p[:, None]) - np.outer(q, q)
            cov[np.diag_indices_from(cov)] += 1e-15
            step = -np.linalg.solve(cov, grad)
            g0 = float(mu @ q_t + log_z)
            t = 1.0
            for _ in range(60):
                trial = mu + t * step
                _, log_z_t = _distribution_from_mu(trial, indicators)
                if float(trial @ q_t + log_z_t) <= g0:
                    break
                t *= 0.5
            mu = mu + t * step
        p, _ = _distribution_from_mu(mu, indicators)
        dual_gap = float(np.abs(q_t - p @ indicators).max())

    probs, _ = _distribution_from_mu(mu, indicators)
    q = probs @ indicators
    big_q = indicators.T @ (indicators * probs[:, None])
    return EnumeratedMaxEnt(
        n=n, ell=ell, subsets=subsets, probs=probs, q=q, big_q=big_q, mu=mu,
        dual_gap=dual_gap,
    )


def _topk_value_and_subgradient(m: np.ndarray, k: int):
    """Squared top-k norm and a tie-averaged subgradient, batched over rows.

    Coordinates tied with the k-th largest magnitude share the leftover
    weight equally, which keeps the ascent stable at crossing points.
    """
    absm = np.abs(m)
    d = m.shape[1]
    kth = np.partition(absm, d - k, axis=1)[:, d - k]
    tol = 1e-12 * (1.0 + kth)
    strict = absm > (kth + tol)[:, None]
    boundary = np.abs(absm - kth[:, None]) <= tol[:, None]
    n_strict = strict.sum(axis=1)
    n_boundary = np.maximum(boundary.sum(axis=1), 1)
    share = (k - n_strict) / n_boundary
    coef = strict + boundary * share[:, None]
    value = np.sum(m**2 * coef, axis=1)
    subgrad = 2.0 * m * coef
    return value, subgrad


def brute_force_Tk(v, k: int, restarts: int = 64, rng=None, n_iter: int = 400,
                   full_output: bool = False):
    """Optimal trace distance by subgradient ascent over unit measurements.

    Maximizes ``<m, v_sorted>^2 - topk(m)^2`` on the sphere from ``restarts``
    random starts plus the analytic start produced by the production
    solver (whose value is *not* trusted; the objective is re-evaluated
    here).  Reliable for d <= 16.
    """
    rng = np.random.default_rng(rng)
    vs = np.sort(np.abs(np.asarray(v, dtype=complex)).ravel())[::-1]
    vs = vs / np.linalg.norm(vs)
    d = vs.size
    if not 1 <= k <= d:
        raise InvalidInputError(f"k must satisfy 1 <= k <= {d}, got {k}")

    starts = rng.normal(size=(restarts, d))
    from . import tracedist  # deferred to keep the oracle importable alone

    analytic = tracedist.solve(canonicalize(vs), k).m
    m = np.vstack([starts, analytic, vs])
    m /= np.linalg.norm(m, axis=1, keepdims=True)

    def objective(mm):
        tk, grad_tk = _topk_value_and_subgradient(mm, k)
        ip = mm @ vs
        return ip**2 - tk, 2.0 * ip[:, None] * vs - grad_tk

    f, grad = objective(m)
    eta = np.full(m.shape[0], 0.25)
    for _ in range(n_iter):
        trial = m + eta[:, None] * grad
        trial /= np.linalg.norm(trial, axis=1, keepdims=True)
        f_new, grad_new = objective(trial)
        improved = f_new >= f - 1e-15
        m = np.where(improved[:, None], trial, m)
        f = np.where(improved, f_new, f)
        grad = np.where(improved[:, None], grad_new, grad)
        eta = np.where(improved, np.minimum(eta * 1.2, 1.0), eta * 0.4)
        if eta.max() < 1e-18:
            break
    best = int(np.argmax(f))
    value = float(max(f[best], 0.0))
    if full_output:
        return value, m[best]
    return value


@dataclass(frozen=True)
class MomentReport:
    """Empirical observable moments of an ensemble against the lemma bounds.

    ``bias_bound`` caps the mean per-sample trace distance
    (sqrt of the mixture trace distance) and ``variance_bound`` caps the
    observable variance (T (1 + sqrt(T))^2).
    """

    mean_estimate: float
    sample_variance: float
    mean_trace_distance: float
    n_samples: int
    bias_bound: float
    variance_bound: float


def monte_carlo_moments(
    ens: SparseEnsemble, observable, n_samples: int, rng: np.random.Generator
) -> MomentReport:
    """Sample the ensemble and report moments of ``w* M w``.

    The observable is given in the canonical basis and must be Hermitian
    with operator norm at most 1.  Per-sample trace distances to the target
    use the pure-state closed form sqrt(1 - <v, w>^2).
    """
    if n_samples < 100:
        raise InvalidInputError("need at least 100 samples")
    obs = np.asarray(observable)
    if np.abs(obs - obs.conj().T).max() > 1e-10:
        raise InvalidInputError("observable must be Hermitian")
    if np.abs(np.linalg.eigvalsh(obs)).max() > 1.0 + 1e-9:
        raise InvalidInputError("observable must have operator norm at most 1")
    w = sample_states(ens, rng, n_samples)
    estimates = np.einsum("ni,ij,nj->n", w, obs, w).real
    v = ens.canon.values
    overlap = w @ v
    per_sample_t = np.sqrt(np.clip(1.0 - overlap**2, 0.0, 1.0))
    sigma = second_moment(ens) / ens.norm_const**2
    t_mix = trace_distance(np.outer(v, v), sigma)
    return MomentReport(
        mean_estimate=float(estimates.mean()),
        sample_variance=float(estimates.var(ddof=1)),
        mean_trace_distance=float(per_sample_t.mean()),
        n_samples=n_samples,
        bias_bound=float(np.sqrt(t_mix)),
        variance_bound=float(t_mix * (1.0 + np.sqrt(t_mix)) ** 2),
    )
