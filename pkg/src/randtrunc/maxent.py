"""Max-entropy distributions over fixed-size subsets with given marginals.

The distribution over size-``ell`` subsets of ``[n]`` with weights
``w_i = exp(-mu_i)`` assigns probability proportional to the product of the
weights of the included items (conditional Poisson sampling).  This module
computes its partition function, inclusion marginals, pair marginals, fits
the weights to prescribed marginals by a damped Newton method, and samples
subsets exactly by two routes: a sequential conditional sampler and a
rejection sampler driven by Glauber dynamics.

Partition arithmetic runs in the linear domain after the gauge shift
``sum(exp(-mu)) = ell``; if any shifted weight leaves ``[1e-300, 1e300]``
(or the linear table degenerates), the same recursion is rerun in the log
domain.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit, logsumexp

__all__ = [
    "MaxEntModel",
    "FitResult",
    "PartitionCancellationError",
    "GlauberBudgetError",
    "BoundaryMarginalError",
    "build_model",
    "partition_recursive",
    "partition_power_sums",
    "marginals",
    "pair_marginals",
    "fit_weights",
    "sample_sequential",
    "sample_sequential_batch",
    "sample_glauber",
    "sample_glauber_batch",
]

_LINEAR_LIMIT = np.log(1e300)
_TIE_RTOL = 1e-12
_NEAR_TIE_RTOL = 1e-7
_STEP_CAP = 10.0


class PartitionCancellationError(ArithmeticError):
    """The signed power-sum recursion lost too much precision."""


class GlauberBudgetError(RuntimeError):
    """The Glauber rejection sampler exhausted its restart budget."""

    def __init__(self, restarts: int):
        super().__init__(f"no sample of the requested size after {restarts} restarts")
        self.restarts = restarts


class BoundaryMarginalError(ValueError):
    """A target marginal sits at 0 or 1 and must be handled deterministically."""


def _suffix_table_linear(w: np.ndarray, ell: int) -> np.ndarray:
    """Table z[a, i] = Z(a, {i, ..., n-1}); z[0, :] = 1, z[a, n] = 0."""
    n = w.size
    z = np.zeros((ell + 1, n + 1))
    z[0, :] = 1.0
    for i in range(n - 1, -1, -1):
        z[1:, i] = z[1:, i + 1] + w[i] * z[0:ell, i + 1]
    return z


def _suffix_table_log(log_w: np.ndarray, ell: int) -> np.ndarray:
    """Log-domain variant of the suffix recursion (same layout, log values)."""
    n = log_w.size
    z = np.full((ell + 1, n + 1), -np.inf)
    z[0, :] = 0.0
    for i in range(n - 1, -1, -1):
        z[1:, i] = np.logaddexp(z[1:, i + 1], log_w[i] + z[0:ell, i + 1])
    return z


def _prefix_table_linear(w: np.ndarray, ell: int) -> np.ndarray:
    """Table z[a, i] = Z(a, {0, ..., i-1}); mirror image of the suffix table."""
    n = w.size
    z = np.zeros((ell + 1, n + 1))
    z[0, :] = 1.0
    for i in range(n):
        z[1:, i + 1] = z[1:, i] + w[i] * z[0:ell, i]
    return z


def _prefix_table_log(log_w: np.ndarray, ell: int) -> np.ndarray:
    n = log_w.size
    z = np.full((ell + 1, n + 1), -np.inf)
    z[0, :] = 0.0
    for i in range(n):
        z[1:, i + 1] = np.logaddexp(z[1:, i], log_w[i] + z[0:ell, i])
    return z


def _marginals_and_log_totals(log_w: np.ndarray, ell: int):
    """Inclusion marginals and log Z(a, [n]) for a = 0..ell.

    Each marginal is w_i Z(ell-1, [n] minus i) / Z(ell, [n]) with the
    complement partition value splitting into prefix times suffix
    contributions; every term is positive, so no cancellation occurs (the
    textbook subset-size recursion for q amplifies rounding exponentially
    once the weights are spread).  Runs in the linear domain in a locally
    shifted gauge, with a log-domain fallback on underflow.
    """
    n = log_w.size
    c = log_w.max()
    w = np.exp(log_w - c)
    suf = _suffix_table_linear(w, ell)
    z_totals = suf[:, 0]
    if np.all(z_totals > 1e-250):
        pre = _prefix_table_linear(w, ell)
        conv = np.zeros(n)
        for b in range(ell):
            conv += pre[b, :-1] * suf[ell - 1 - b, 1:]
        q = w * conv / z_totals[ell]
        return q, np.log(z_totals) + c * np.arange(ell + 1)
    log_suf = _suffix_table_log(log_w, ell)
    log_pre = _prefix_table_log(log_w, ell)
    terms = log_pre[:ell, :-1] + log_suf[ell - 1 :: -1, 1:]
    q = np.exp(log_w + logsumexp(terms, axis=0) - log_suf[ell, 0])
    return q, log_suf[:, 0]


@dataclass(frozen=True)
class MaxEntModel:
    """Weights and cached partition tables for one subset distribution.

    ``mu`` is stored in the gauge ``sum(exp(-mu)) == ell``.  Exactly one of
    the suffix tables is populated depending on the numerical domain.
    """

    n: int
    ell: int
    mu: np.ndarray
    log_weights: np.ndarray
    z_suffix: np.ndarray | None = field(repr=False, default=None)
    log_z_suffix: np.ndarray | None = field(repr=False, default=None)

    @property
    def use_log(self) -> bool:
        return self.z_suffix is None

    @property
    def z(self) -> float:
        """Total partition value Z(ell, [n]) (in the linear domain)."""
        if self.use_log:
            return float(np.exp(self.log_z_suffix[self.ell, 0]))
        return float(self.z_suffix[self.ell, 0])

    @property
    def log_z_totals(self) -> np.ndarray:
        """log Z(a, [n]) for a = 0..ell."""
        if self.use_log:
            return self.log_z_suffix[:, 0]
        with np.errstate(divide="ignore"):
            return np.log(self.z_suffix[:, 0])

    @cached_property
    def glauber_probs(self) -> np.ndarray:
        """Product-Bernoulli probabilities whose odds match the weights.

        Calibrated so the expected draw size equals ``ell``; conditioning
        the product measure on size ``ell`` then reproduces the subset
        distribution exactly.
        """
        if self.ell == self.n:
            return np.ones(self.n)
        lw = self.log_weights

        def mean_size(s):
            return float(expit(s + lw).sum()) - self.ell

        lo, hi = -745.0 - lw.max(), 745.0 - lw.min()
        s = brentq(mean_size, lo, hi, xtol=1e-13)
        return expit(s + lw)


def build_model(mu, ell: int) -> MaxEntModel:
    """Shift the weights into the standard gauge and cache partition tables.

    Raises
    ------
    ValueError
        If ``ell`` is out of range or any shifted weight is non-finite
        (the offending indices are reported).
    """
    mu = np.asarray(mu, dtype=float).ravel()
    n = mu.size
    if not 1 <= ell <= n:
        raise ValueError(f"ell must satisfy 1 <= ell <= {n}, got {ell}")
    if not np.all(np.isfinite(mu)):
        bad = np.flatnonzero(~np.isfinite(mu))
        raise ValueError(f"non-finite weights mu at indices {bad.tolist()}")
    shift = logsumexp(-mu) - np.log(ell)
    mu = mu + shift
    log_w = -mu
    use_log = bool(np.any(np.abs(log_w) > _LINEAR_LIMIT))
    z_suffix = None
    if not use_log:
        z_suffix = _suffix_table_linear(np.exp(log_w), ell)
        # entries with a <= n - i are genuine subset sums: positive, finite,
        # and comfortably inside the normal range so ratios stay accurate
        a_idx, i_idx = np.indices(z_suffix.shape)
        valid = a_idx <= (n - i_idx)
        if not np.all(np.isfinite(z_suffix)) or np.any(z_suffix[valid] <= 1e-250):
            use_log = True
            z_suffix = None
    log_z_suffix = _suffix_table_log(log_w, ell) if use_log else None
    return MaxEntModel(
        n=n, ell=ell, mu=mu, log_weights=log_w, z_suffix=z_suffix, log_z_suffix=log_z_suffix
    )


def partition_recursive(mu, ell: int) -> np.ndarray:
    """Suffix partition table of the raw (unshifted) weights.

    Returns the ``(ell+1, n+1)`` array ``z`` with ``z[a, i] =
    Z(a, {i, ..., n-1})``; the total partition value is ``z[ell, 0]``.
    """
    mu = np.asarray(mu, dtype=float).ravel()
    if not 1 <= ell <= mu.size:
        raise ValueError(f"ell must satisfy 1 <= ell <= {mu.size}, got {ell}")
    return _suffix_table_linear(np.exp(-mu), ell)


def partition_power_sums(mu, ell: int) -> float:
    """Total partition value via the signed power-sum recursion.

    Power sums are accumulated naively in O(n*ell).  The alternating signs
    can cancel catastrophically; the result is cross-checked against the
    suffix recursion and a diagnostic error suggests that path on failure.
    """
    mu = np.asarray(mu, dtype=float).ravel()
    if not 1 <= ell <= mu.size:
        raise ValueError(f"ell must satisfy 1 <= ell <= {mu.size}, got {ell}")
    w = np.exp(-mu)
    p = np.array([np.sum(w**j) for j in range(1, ell + 1)])
    z = np.zeros(ell + 1)
    z[0] = 1.0
    for m in range(1, ell + 1):
        signs = (-1.0) ** np.arange(m + 1)  # sign of (-1)^{j+1} for j=1..m
        z[m] = np.sum(-signs[1:] * p[:m] * z[m - 1 :: -1][:m]) / m
    value = float(z[ell])
    reference = float(_suffix_table_linear(w, ell)[ell, 0])
    if value <= 0 or abs(value - reference) > 1e-6 * abs(reference):
        raise PartitionCancellationError(
            "power-sum recursion cancelled catastrophically "
            f"(got {value!r}, suffix recursion gives {reference!r}); "
            "use partition_recursive instead"
        )
    return value


def marginals(model: MaxEntModel) -> np.ndarray:
    """Inclusion probability of each item; sums to ``ell``."""
    return _marginals_and_log_totals(model.log_weights, model.ell)[0]


def _z_excluding(model: MaxEntModel, excluded: tuple[int, ...], a: int) -> float:
    """Z(a, [n] minus excluded) / Z-scale, in the linear domain of log weights."""
    keep = np.setdiff1d(np.arange(model.n), np.array(excluded, dtype=int))
    lw = model.log_weights[keep]
    if a == 0:
        return 1.0
    if a > keep.size:
        return 0.0
    return float(np.exp(_suffix_table_log(lw, a)[a, 0]))


def pair_marginals(model: MaxEntModel) -> np.ndarray:
    """Symmetric pair-inclusion matrix Q with Q[i, i] = q[i].

    Off-diagonal entries use the two-weight ratio formula; groups of tied
    weights are filled through the row-sum identity sum_j Q[i, j] = q[i] *
    ell, and nearly-tied pairs (where the ratio formula is ill-conditioned)
    fall back to a direct complement-partition evaluation.
    """
    n, ell = model.n, model.ell
    q = marginals(model)
    if ell == n:
        return np.ones((n, n))
    lw = model.log_weights
    diff = lw[:, None] - lw[None, :]
    scale = np.maximum(np.abs(lw[:, None]), np.abs(lw[None, :])) + 1.0
    tied = np.abs(diff) <= _TIE_RTOL * scale
    near = (~tied) & (np.abs(diff) <= _NEAR_TIE_RTOL * scale)

    # ratio form: for w_i < w_j, Q = (q_i - q_j t)/(1 - t) with t = w_i/w_j
    t = np.exp(-np.abs(diff))
    q_small = np.where(diff < 0, q[:, None], q[None, :])
    q_large = np.where(diff < 0, q[None, :], q[:, None])
    with np.errstate(divide="ignore", invalid="ignore"):
        Q = (q_small - q_large * t) / (1.0 - t)
    Q[tied] = 0.0
    np.fill_diagonal(Q, q)

    # tied groups via the row-sum identity, constant within a group
    order = np.argsort(lw, kind="stable")
    groups = []
    start = 0
    for pos in range(1, n + 1):
        if pos == n or not tied[order[pos], order[start]]:
            if pos - start > 1:
                groups.append(order[start:pos])
            start = pos
    for g in groups:
        outside = np.setdiff1d(np.arange(n), g)
        c = g.size - 1
        for i in g:
            val = (q[i] * (ell - 1) - Q[i, outside].sum()) / c
            others = g[g != i]
            Q[i, others] = val
    # near ties: the ratio formula is unstable; evaluate those pairs exactly
    for i, j in zip(*np.nonzero(np.triu(near, k=1))):
        zc = _z_excluding(model, (int(i), int(j)), ell - 2)
        log_q = lw[i] + lw[j] + np.log(zc) - model.log_z_totals[ell] if zc > 0 else -np.inf
        Q[i, j] = Q[j, i] = float(np.exp(log_q))
    return Q


@dataclass(frozen=True)
class FitResult:
    """Outcome of a weight fit: model, final residual and diagnostics.

    ``dual_objective`` is the gauge-invariant value
    ``sum(mu * q_target) + log Z``; ``objective_history`` holds it for the
    accepted iterates, and is nonincreasing.
    """

    model: MaxEntModel
    residual: float
    iterations: int
    dual_objective: float
    converged: bool
    objective_history: np.ndarray


def fit_weights(q_target, tol: float = 1e-10, max_iter: int = 200) -> FitResult:
    """Fit weights whose marginals match ``q_target`` in infinity norm.

    Newton iterations on the dual objective use the diagonal covariance
    ``q(1-q)`` with per-coordinate steps capped at 10 and a backtracking
    line search; if the residual fails to halve over five consecutive
    iterations, the dense covariance matrix takes over.  Non-convergence is
    not an error: the best iterate is returned with ``converged=False``.

    Raises
    ------
    BoundaryMarginalError
        If any target marginal is at 0 or 1; such items must be excluded
        or included deterministically before fitting.
    ValueError
        If the targets do not sum to an integer within 1e-6.
    """
    q_t = np.asarray(q_target, dtype=float).ravel()
    n = q_t.size
    if np.any(q_t <= 0.0) or np.any(q_t >= 1.0):
        bad = np.flatnonzero((q_t <= 0.0) | (q_t >= 1.0))
        raise BoundaryMarginalError(
            f"marginals at indices {bad.tolist()} are 0 or 1; "
            "deterministically leave out or include those items"
        )
    total = q_t.sum()
    ell = int(round(total))
    if abs(total - ell) > 1e-6 or ell < 1:
        raise ValueError(f"target marginals must sum to a positive integer, got {total!r}")

    mu = np.log((1.0 - q_t) / q_t)  # product-Bernoulli odds as starting point
    q, log_zt = _marginals_and_log_totals(-mu, ell)
    g = float(mu @ q_t + log_zt[ell])
    residual = float(np.abs(q - q_t).max())
    history = [g]
    best = (residual, mu.copy())
    use_full = False
    no_halving_streak = 0
    iterations = 0

    while residual > tol and iterations < max_iter:
        grad = q_t - q
        if use_full:
            K = pair_marginals(build_model(mu, ell)) - np.outer(q, q)
            K[np.diag_indices_from(K)] += 1e-14
            step = -np.linalg.solve(K, grad)
        else:
            step = (q - q_t) / np.maximum(q * (1.0 - q), 1e-300)
        step = np.clip(step, -_STEP_CAP, _STEP_CAP)

        slope = float(grad @ step)  # negative for a descent direction
        t = 1.0
        accepted = False
        for _ in range(50):
            mu_new = mu + t * step
            q_new, log_zt_new = _marginals_and_log_totals(-mu_new, ell)
            g_new = float(mu_new @ q_t + log_zt_new[ell])
            residual_new = float(np.abs(q_new - q_t).max())
            # Armijo decrease; near the optimum the objective differences
            # drop below fp resolution, so a residual improvement at
            # stagnant objective also counts.
            if g_new <= g + 1e-4 * t * slope or (
                g_new <= g + 1e-14 * (1.0 + abs(g)) and residual_new < residual
            ):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            if not use_full:
                use_full = True
                continue
            break
        no_halving_streak = 0 if residual_new <= 0.5 * residual else no_halving_streak + 1
        mu, log_zt, g, q, residual = mu_new, log_zt_new, min(g_new, g), q_new, residual_new
        iterations += 1
        history.append(g)
        if residual < best[0]:
            best = (residual, mu.copy())
        if not use_full and no_halving_streak >= 5:
            use_full = True

    residual, mu = best
    model = build_model(mu, ell)
    g_final = float(model.mu @ q_t + model.log_z_totals[ell])
    return FitResult(
        model=model,
        residual=residual,
        iterations=iterations,
        dual_objective=g_final,
        converged=residual <= tol,
        objective_history=np.asarray(history),
    )


def sample_sequential_batch(model: MaxEntModel, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` independent subsets, returned as a (size, ell) index array.

    Items are visited in order; the inclusion probability of item i given
    the remaining quota is a ratio of cached suffix partition values, so a
    draw costs O(n) after table construction.  Rows are sorted ascending.
    """
    n, ell = model.n, model.ell
    out = np.zeros((size, ell), dtype=np.int64)
    rem = np.full(size, ell, dtype=np.int64)
    pos = np.zeros(size, dtype=np.int64)
    rows = np.arange(size)
    use_log = model.use_log
    table = model.log_z_suffix if use_log else model.z_suffix
    lw = model.log_weights
    w = np.exp(lw)
    for i in range(n):
        if use_log:
            with np.errstate(invalid="ignore"):
                p = np.exp(lw[i] + table[np.maximum(rem - 1, 0), i + 1] - table[rem, i])
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                p = w[i] * table[np.maximum(rem - 1, 0), i + 1] / table[rem, i]
        p = np.where(rem == 0, 0.0, p)
        p = np.where(rem == n - i, 1.0, p)  # remaining items all forced in
        inc = rng.random(size) < p
        out[rows[inc], pos[inc]] = i
        pos += inc
        rem -= inc
    return out


def sample_sequential(model: MaxEntModel, rng: np.random.Generator) -> np.ndarray:
    """Draw one subset exactly from the model's distribution."""
    return sample_sequential_batch(model, rng, 1)[0]


def sample_glauber_batch(
    model: MaxEntModel, rng: np.random.Generator, size: int, max_restarts: int = 1000
) -> tuple[np.ndarray, np.ndarray]:
    """Rejection-sample ``size`` subsets via Glauber dynamics.

    Each round draws the calibrated product-Bernoulli state, applies n
    single-coordinate Glauber updates (which leave the product measure
    invariant), and accepts if the draw has exactly ``ell`` ones; otherwise
    the chain restarts from a fresh product sample.  Returns the subsets
    and the per-sample restart counts.

    Raises
    ------
    GlauberBudgetError
        When any chain exceeds ``max_restarts`` rounds; this signals a
        statistical anomaly or a miscalibrated product measure.
    """
    n, ell = model.n, model.ell
    out = np.zeros((size, ell), dtype=np.int64)
    restarts = np.zeros(size, dtype=np.int64)
    if ell == n:
        out[:] = np.arange(n)
        return out, restarts
    pi = model.glauber_probs
    pending = np.arange(size)
    round_idx = 0
    while pending.size:
        if round_idx > max_restarts:
            raise GlauberBudgetError(round_idx - 1)
        b = pending.size
        x = rng.random((b, n)) < pi
        rows = np.arange(b)
        for _ in range(n):
            i = rng.integers(0, n, size=b)
            x[rows, i] = rng.random(b) < pi[i]
        ok = x.sum(axis=1) == ell
        if np.any(ok):
            out[pending[ok]] = np.nonzero(x[ok])[1].reshape(-1, ell)
            restarts[pending[ok]] = round_idx
        pending = pending[~ok]
        round_idx += 1
    return out, restarts


def sample_glauber(
    model: MaxEntModel, rng: np.random.Generator, max_restarts: int = 1000
) -> tuple[np.ndarray, int]:
    """Draw one subset by the Glauber rejection route; returns (subset, restarts)."""
    subsets, restarts = sample_glauber_batch(model, rng, 1, max_restarts=max_restarts)
    return subsets[0], int(restarts[0])
