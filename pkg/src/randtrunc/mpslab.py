"""Matrix-product-state laboratory for randomized bond truncation.

Desk-scale MPS engine: mixed-canonical forms by QR sweeps, spectrum
replacement with power laws, deterministic and randomized bond truncation,
exact single-site expectations, and the experiment harness comparing the
truncation strategies on power-law respectrumed random states.
"""

from dataclasses import dataclass, field

import numpy as np

from .canonical import InvalidInputError, canonicalize
from .ensemble import sample_state
from . import robust, tracedist

__all__ = [
    "MPSState",
    "ExperimentRecord",
    "ExperimentConfig",
    "PAULI_Z",
    "random_mps",
    "canonicalize_mps",
    "respectrum_bond",
    "respectrum_power_law",
    "truncate_bond",
    "truncate_all_bonds",
    "expectation_single_site",
    "to_statevector",
    "overlap",
    "choose_cutoff",
    "run_experiment",
]

PAULI_Z = np.diag([1.0, -1.0]).astype(complex)

STRATEGIES = ("dtrunc", "rtrunc-td", "rtrunc-rob")


@dataclass
class MPSState:
    """Chain of site tensors with an optional explicit center bond.

    ``tensors[j]`` has shape ``(r_j, p, r_{j+1})`` with ``r_0 = r_n = 1``.
    When ``center`` is bond ``m`` (1-based, between sites m-1 and m), sites
    left of the bond are left-isometries, sites right of it are
    right-isometries, and ``schmidt`` holds the bond spectrum, so the state
    is ``... L diag(schmidt) R ...``.  Treat instances as immutable; all
    operations return new states.
    """

    tensors: list = field(repr=False)
    center: int | None = None
    schmidt: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.tensors)

    @property
    def phys_dim(self) -> int:
        return self.tensors[0].shape[1]

    @property
    def bond_dims(self) -> tuple:
        return tuple(t.shape[2] for t in self.tensors[:-1])


def _absorbed(mps: MPSState) -> list:
    """Site tensors with the center spectrum multiplied into the right block."""
    tensors = [t for t in mps.tensors]
    if mps.center is not None:
        m = mps.center
        tensors[m] = mps.schmidt[:, None, None] * tensors[m]
    return tensors


def to_statevector(mps: MPSState) -> np.ndarray:
    """Dense coefficient vector; exponential in n, for desk-scale checks."""
    acc = np.ones((1, 1), dtype=complex)
    for t in _absorbed(mps):
        acc = np.einsum("fa,apb->fpb", acc, t).reshape(-1, t.shape[2])
    return acc.ravel()


def overlap(a: MPSState, b: MPSState) -> complex:
    """Inner product <a, b> by transfer contraction."""
    env = np.ones((1, 1), dtype=complex)
    for ta, tb in zip(_absorbed(a), _absorbed(b)):
        env = np.einsum("ab,apc,bpd->cd", env, ta.conj(), tb)
    return complex(env[0, 0])


def canonicalize_mps(mps: MPSState, bond: int) -> MPSState:
    """Mixed-canonical form with the center at ``bond`` (1..n-1), normalized.

    Left QR sweep up to the bond, right QR sweep down to it, then an SVD of
    the accumulated center matrix exposes the nonincreasing bond spectrum.
    """
    n = mps.n
    if not 1 <= bond <= n - 1:
        raise InvalidInputError(f"bond must be in 1..{n - 1}, got {bond}")
    tensors = [t.astype(complex, copy=True) for t in _absorbed(mps)]
    carry = np.ones((1, 1), dtype=complex)
    for j in range(bond):
        t = np.einsum("ab,bpc->apc", carry, tensors[j])
        l, p, r = t.shape
        q, rr = np.linalg.qr(t.reshape(l * p, r))
        tensors[j] = q.reshape(l, p, q.shape[1])
        carry = rr
    carry_right = np.ones((1, 1), dtype=complex)
    for j in range(n - 1, bond - 1, -1):
        t = np.einsum("apb,bc->apc", tensors[j], carry_right)
        l, p, r = t.shape
        q, rr = np.linalg.qr(t.reshape(l, p * r).conj().T)
        tensors[j] = q.conj().T.reshape(q.shape[1], p, r)
        carry_right = rr.conj().T
    center = carry @ carry_right
    u, s, vh = np.linalg.svd(center)
    norm = np.linalg.norm(s)
    if norm == 0.0:
        raise InvalidInputError("zero state cannot be canonicalized")
    s = s / norm
    tensors[bond - 1] = np.einsum("apb,bc->apc", tensors[bond - 1], u)
    tensors[bond] = np.einsum("ab,bpc->apc", vh, tensors[bond])
    return MPSState(tensors=tensors, center=bond, schmidt=s)


def random_mps(n: int, phys_dim: int, max_bond: int, rng: np.random.Generator) -> MPSState:
    """Random MPS with iid standard Gaussian complex entries, normalized.

    Bond dimensions follow min(max_bond, p^j, p^(n-j)).
    """
    if n < 2:
        raise InvalidInputError("need at least two sites")
    dims = [min(max_bond, phys_dim**j, phys_dim ** (n - j)) for j in range(n + 1)]
    tensors = []
    for j in range(n):
        shape = (dims[j], phys_dim, dims[j + 1])
        tensors.append(rng.normal(size=shape) + 1j * rng.normal(size=shape))
    return canonicalize_mps(MPSState(tensors=tensors), 1)


def _powerlaw_spectrum(size: int, gamma: float) -> np.ndarray:
    s = np.arange(1, size + 1, dtype=float) ** (-gamma)
    return s / np.linalg.norm(s)


def respectrum_bond(mps: MPSState, bond: int, gamma: float) -> MPSState:
    """Replace the spectrum at one bond with the normalized power law."""
    canonical = canonicalize_mps(mps, bond)
    new_s = _powerlaw_spectrum(canonical.schmidt.size, gamma)
    return MPSState(tensors=canonical.tensors, center=bond, schmidt=new_s)


def respectrum_power_law(mps: MPSState, gamma: float) -> MPSState:
    """Sweep left to right, installing the power-law spectrum at each bond.

    Later replacements can disturb earlier bonds; the final state carries
    the exact power law only at the last bond processed.
    """
    state = mps
    for bond in range(1, mps.n):
        state = respectrum_bond(state, bond, gamma)
    return state


def truncate_bond(
    mps: MPSState, bond: int, cutoff: int, strategy: str, rng: np.random.Generator | None = None
) -> MPSState:
    """Truncate one bond to dimension at most ``cutoff``.

    ``dtrunc`` keeps the largest spectrum entries and renormalizes;
    ``rtrunc-td`` / ``rtrunc-rob`` draw one sparse spectrum from the optimal
    trace-distance / robustness ensemble over the bond's Schmidt vector and
    install its support.  The state is recanonicalized at the bond first if
    needed.
    """
    if strategy not in STRATEGIES:
        raise InvalidInputError(f"unknown strategy {strategy!r}")
    state = mps if mps.center == bond else canonicalize_mps(mps, bond)
    s = state.schmidt
    if not 1 <= cutoff <= s.size:
        raise InvalidInputError(f"cutoff must be in 1..{s.size}, got {cutoff}")
    if cutoff == s.size:
        return state
    if strategy == "dtrunc":
        keep = np.arange(cutoff)
        new_s = s[:cutoff] / np.linalg.norm(s[:cutoff])
    else:
        if rng is None:
            raise InvalidInputError("randomized truncation needs an rng")
        canon = canonicalize(s)
        if strategy == "rtrunc-td":
            ens = tracedist.build_ensemble(tracedist.solve(canon, cutoff), canon)
        else:
            ens = robust.build_ensemble(canon, cutoff)
        w = sample_state(ens, rng)
        keep = np.flatnonzero(w > 0.0)
        new_s = w[keep]
    tensors = [t for t in state.tensors]
    tensors[bond - 1] = tensors[bond - 1][:, :, keep]
    tensors[bond] = tensors[bond][keep, :, :]
    return MPSState(tensors=tensors, center=bond, schmidt=new_s)


def truncate_all_bonds(
    mps: MPSState, cutoff: int, strategy: str, rng: np.random.Generator | None = None
) -> MPSState:
    """Truncate every bond left to right, recanonicalizing between bonds."""
    state = mps
    for bond in range(1, mps.n):
        state = canonicalize_mps(state, bond)
        if state.schmidt.size > cutoff:
            state = truncate_bond(state, bond, cutoff, strategy, rng)
    return state


def expectation_single_site(mps: MPSState, site: int, observable) -> float:
    """Exact <v| O_site |v> by transfer contraction; real for Hermitian O."""
    obs = np.asarray(observable, dtype=complex)
    n = mps.n
    if not 0 <= site < n:
        raise InvalidInputError(f"site must be in 0..{n - 1}, got {site}")
    env = np.ones((1, 1), dtype=complex)
    for j, t in enumerate(_absorbed(mps)):
        if j == site:
            env = np.einsum("ab,apc,pq,bqd->cd", env, t.conj(), obs, t)
        else:
            env = np.einsum("ab,apc,bpd->cd", env, t.conj(), t)
    value = complex(env[0, 0])
    return float(value.real)


def choose_cutoff(mps: MPSState, target_fidelity: float = 0.99) -> int:
    """Smallest cutoff whose multi-bond fidelity bound reaches the target.

    Uses sqrt(1 - sum of per-bond tail weights).  When even the largest
    proper cutoff misses the target (flat spectra), that largest proper
    cutoff is returned so a truncation still occurs.
    """
    spectra = [canonicalize_mps(mps, m).schmidt for m in range(1, mps.n)]
    max_dim = max(s.size for s in spectra)
    for cutoff in range(1, max_dim):
        tail = sum(float(np.sum(s[cutoff:] ** 2)) for s in spectra)
        if tail < 1.0 and np.sqrt(1.0 - tail) >= target_fidelity:
            return cutoff
    return max_dim - 1


@dataclass(frozen=True)
class ExperimentRecord:
    """One strategy's estimate for one (seed, gamma) state."""

    gamma: float
    cutoff: int
    seed: int
    strategy: str
    estimate: float
    exact: float
    n_samples: int
    sample_std: float


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings for the randomized-truncation comparison experiment."""

    n: int = 9
    gammas: tuple = (0.1, 0.3)
    seeds: tuple = (0, 1, 2, 3)
    samples: int = 100
    site: int = 4
    cutoff: int | None = None  # None: pick per state via choose_cutoff
    strategies: tuple = ("dtrunc", "rtrunc-td")
    phys_dim: int = 2
    max_bond: int | None = None
    target_fidelity: float = 0.99


def run_experiment(config: ExperimentConfig) -> list:
    """Compare truncation strategies on power-law respectrumed random states.

    For each (seed, gamma) pair: build a random MPS, install the power-law
    spectra, compute the exact single-site expectation, then estimate it
    after truncating every bond with each strategy.  Randomized strategies
    draw one sample per full sweep and average over ``samples`` sweeps.
    """
    obs = PAULI_Z if config.phys_dim == 2 else np.eye(config.phys_dim, dtype=complex)
    max_bond = config.max_bond or config.phys_dim ** (config.n // 2)
    records = []
    for seed in config.seeds:
        for gamma_index, gamma in enumerate(config.gammas):
            rng = np.random.default_rng([int(seed), gamma_index])
            base = random_mps(config.n, config.phys_dim, max_bond, rng)
            state = respectrum_power_law(base, gamma)
            exact = expectation_single_site(state, config.site, obs)
            cutoff = config.cutoff or choose_cutoff(state, config.target_fidelity)
            for strategy in config.strategies:
                if strategy == "dtrunc":
                    est = expectation_single_site(
                        truncate_all_bonds(state, cutoff, "dtrunc"), config.site, obs
                    )
                    records.append(ExperimentRecord(
                        gamma=gamma, cutoff=cutoff, seed=seed, strategy=strategy,
                        estimate=est, exact=exact, n_samples=1, sample_std=0.0,
                    ))
                else:
                    draws = np.array([
                        expectation_single_site(
                            truncate_all_bonds(state, cutoff, strategy, rng),
                            config.site, obs,
                        )
                        for _ in range(config.samples)
                    ])
                    records.append(ExperimentRecord(
                        gamma=gamma, cutoff=cutoff, seed=seed, strategy=strategy,
                        estimate=float(draws.mean()), exact=exact,
                        n_samples=config.samples,
                        sample_std=float(draws.std(ddof=1)),
                    ))
    return records
