"""Command-line interface.

One dispatcher with subcommands: norms, tdist, robust, entangled,
maxent-fit, powerlaw, mps.  Results go to stdout as JSON (or a CSV table
with ``--format csv``); side outputs such as density matrices and sampled
states are written to files given by flags.  Failures print a structured
JSON error to stderr and exit nonzero.  All randomness is driven by
``--seed``, making CSV outputs byte-identical across runs.
"""

import argparse
import json
import sys

import numpy as np

from . import bipartite, maxent, mpslab, oracle, powerlaw, robust, tracedist
from .canonical import canonicalize, k_support_norm, robustness_k, top_k_norm
from .ensemble import sample_states

CSV_VERSION_LINE = "# rtrunc-csv v1"


def _load_json(path):
    with open(path) as fh:
        return json.load(fh)


def _parse_vector(data) -> np.ndarray:
    """Vector JSON: flat array of reals or array of [re, im] pairs."""
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 1:
        return arr.astype(complex)
    if arr.ndim == 2 and arr.shape[1] == 2:
        return arr[:, 0] + 1j * arr[:, 1]
    raise ValueError("vector JSON must be a flat array or [re, im] pairs")


def _load_vector(path) -> np.ndarray:
    return _parse_vector(_load_json(path))


def _fmt(x) -> str:
    return repr(float(x))


def _write_csv(path, header, rows):
    lines = [CSV_VERSION_LINE, ",".join(header)]
    lines += [",".join(_fmt(x) for x in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _emit(result: dict, fmt: str):
    if fmt == "json":
        print(json.dumps(result, indent=2, sort_keys=True))
    else:
        scalars = {k: v for k, v in result.items() if isinstance(v, (int, float))}
        print(CSV_VERSION_LINE)
        print(",".join(scalars))
        print(",".join(_fmt(v) for v in scalars.values()))


def _matrix_csv(path, matrix):
    rows = [list(row) for row in np.asarray(matrix).real]
    _write_csv(path, [f"c{j}" for j in range(len(rows[0]))], rows)


def _ensemble_json(ens) -> dict:
    return {
        "kind": ens.kind,
        "prefix": [float(x) for x in ens.prefix],
        "window": [int(j) for j in ens.window],
        "window_amp": float(ens.window_amp),
        "subset_size": int(ens.subset_size),
        "marginals": [float(x) for x in ens.marginals],
        "mu": [] if ens.model is None else [float(x) for x in ens.model.mu],
        "norm_const": float(ens.norm_const),
    }


def _samples_csv(path, ens, n_samples, seed):
    rng = np.random.default_rng(seed)
    w = sample_states(ens, rng, n_samples)
    _write_csv(path, [f"w{j}" for j in range(w.shape[1])], w)


def _cmd_norms(args):
    canon = canonicalize(_load_vector(args.state))
    ks = k_support_norm(canon, args.k)
    _emit(
        {
            "d": canon.d,
            "k": args.k,
            "top_k_norm": top_k_norm(canon, args.k),
            "k_support_norm": ks.value,
            "r": ks.r,
            "fidelity": top_k_norm(canon, args.k),
            "robustness": robustness_k(canon, args.k),
        },
        args.format,
    )


def _cmd_tdist(args):
    canon = canonicalize(_load_vector(args.state))
    sol = tracedist.solve(canon, args.k)
    result = {
        "T_k": sol.lam,
        "r": sol.r,
        "ell": sol.ell,
        "theta": sol.theta,
        "k": args.k,
        "d": canon.d,
    }
    ens = None
    if args.ensemble or args.sigma or args.samples or args.verify or args.oracle:
        ens = tracedist.build_ensemble(sol, canon, fit_tol=args.tol)
    if args.ensemble:
        result["ensemble"] = _ensemble_json(ens)
    if args.sigma or args.verify:
        dm, t_spectral = tracedist.density_matrix(ens)
        if args.sigma:
            _matrix_csv(args.sigma, dm.entries)
        if args.verify:
            report = tracedist.verify_optimality(canon, sol, dm)
            result["verify"] = {
                "eig_residual": report.eig_residual,
                "fenchel_gap": report.fenchel_gap,
                "spectral_gap": report.spectral_gap,
                "spectral_T": t_spectral,
            }
    if args.samples:
        _samples_csv(args.samples_out, ens, args.samples, args.seed)
    if args.oracle:
        bf = oracle.brute_force_Tk(canon.values, args.k, rng=args.seed)
        result["oracle"] = {"brute_force_T_k": bf, "abs_diff": abs(bf - sol.lam)}
    _emit(result, args.format)


def _cmd_robust(args):
    canon = canonicalize(_load_vector(args.state))
    ens = robust.build_ensemble(canon, args.k)
    result = {
        "R_k": robustness_k(canon, args.k),
        "r": int(ens.subset_size - 1),
        "k": args.k,
        "d": canon.d,
    }
    if args.tau or args.cert or args.oracle:
        dm, cert = robust.density_matrix(ens)
        if args.tau:
            _matrix_csv(args.tau, dm.entries)
        if args.cert or args.oracle:
            result["certificate"] = {
                "min_diag": cert.min_diag,
                "max_offdiag": cert.max_offdiag,
                "max_abs_rowsum": cert.max_abs_rowsum,
                "ok": cert.ok,
            }
        if args.oracle:
            v = canon.values
            witness = (1.0 + result["R_k"]) * dm.entries - np.outer(v, v)
            result["oracle"] = {"witness_min_eig": float(np.linalg.eigvalsh(witness)[0])}
    if args.samples:
        _samples_csv(args.samples_out, ens, args.samples, args.seed)
    _emit(result, args.format)


def _cmd_entangled(args):
    data = _load_json(args.state)
    state = bipartite.schmidt_decompose(_parse_vector(data["state"]), data["a"], data["b"])
    value, ens = bipartite.solve_entangled(state, args.k, mode=args.mode)
    result = {
        "value": value,
        "mode": args.mode,
        "k": args.k,
        "a": state.a,
        "b": state.b,
        "schmidt_rank": state.schmidt_rank,
        "schmidt": [float(x) for x in state.schmidt],
    }
    if args.ensemble:
        result["ensemble"] = _ensemble_json(ens)
    if args.samples:
        rng = np.random.default_rng(args.seed)
        rows = []
        for _ in range(args.samples):
            psi = bipartite.sample_low_rank_state(state, ens, rng)
            rows.append([x for c in psi for x in (c.real, c.imag)])
        header = [f"c{j}_{p}" for j in range(state.a * state.b) for p in ("re", "im")]
        _write_csv(args.samples_out, header, rows)
    _emit(result, args.format)


def _cmd_maxent_fit(args):
    q_target = np.asarray(_load_json(args.marginals), dtype=float)
    fit = maxent.fit_weights(q_target, tol=args.tol)
    result = {
        "mu": [float(x) for x in fit.model.mu],
        "residual": fit.residual,
        "iterations": fit.iterations,
        "dual_objective": fit.dual_objective,
        "converged": fit.converged,
    }
    if args.pairs:
        _matrix_csv(args.pairs, maxent.pair_marginals(fit.model))
    _emit(result, args.format)


def _cmd_powerlaw(args):
    gammas = [float(g) for g in args.gamma.split(",")]
    k_values = [int(k) for k in args.k_list.split(",")]
    rows = powerlaw.powerlaw_sweep(args.d, gammas, k_values, n_fit_points=args.fit_points)
    _write_csv(
        args.out,
        ["gamma", "d", "k", "epsilon", "T_k", "R_k", "fitted_exponent"],
        [[r.gamma, r.d, r.k, r.epsilon, r.t_k, r.r_k, r.fitted_exponent] for r in rows],
    )


def _cmd_mps(args):
    raw = _load_json(args.config)
    config = mpslab.ExperimentConfig(
        n=raw.get("n", 9),
        gammas=tuple(raw.get("gammas", (0.1, 0.3))),
        seeds=tuple(raw.get("seeds", (0, 1, 2, 3))),
        samples=raw.get("samples", 100),
        site=raw.get("site", 4),
        cutoff=raw.get("cutoff"),
        strategies=tuple(raw.get("strategies", ("dtrunc", "rtrunc-td"))),
        phys_dim=raw.get("phys_dim", 2),
        max_bond=raw.get("max_bond"),
        target_fidelity=raw.get("target_fidelity", 0.99),
    )
    records = mpslab.run_experiment(config)
    lines = [CSV_VERSION_LINE, "gamma,cutoff,seed,strategy,estimate,exact,n_samples,sample_std"]
    for r in records:
        lines.append(
            f"{_fmt(r.gamma)},{r.cutoff},{r.seed},{r.strategy},"
            f"{_fmt(r.estimate)},{_fmt(r.exact)},{r.n_samples},{_fmt(r.sample_std)}"
        )
    text = "\n".join(lines) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)


def _add_common(parser, state_help="path to the vector JSON file"):
    parser.add_argument("state", help=state_help)
    parser.add_argument("--k", type=int, required=True, help="sparsity / rank bound")


def _add_sampling(parser):
    parser.add_argument("--samples", type=int, default=0, help="number of states to sample")
    parser.add_argument(
        "--samples-out", default="-", help="CSV destination for samples ('-' = stdout)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="randtrunc",
        description="Optimal randomized truncation of pure states to sparse ensembles",
    )
    parser.add_argument("--seed", type=int, default=0, help="RNG seed for sampling")
    parser.add_argument("--tol", type=float, default=1e-10, help="fit tolerance")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    parser.add_argument("--oracle", action="store_true", help="cross-check against the oracle")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("norms", help="top-k norm, k-support norm, fidelity, robustness")
    _add_common(p)
    p.set_defaults(func=_cmd_norms)

    p = sub.add_parser("tdist", help="optimal trace-distance truncation")
    _add_common(p)
    p.add_argument("--ensemble", action="store_true", help="include the ensemble description")
    p.add_argument("--sigma", help="write the density matrix CSV here")
    p.add_argument("--verify", action="store_true", help="include the optimality residuals")
    _add_sampling(p)
    p.set_defaults(func=_cmd_tdist)

    p = sub.add_parser("robust", help="robustness-optimal truncation")
    _add_common(p)
    p.add_argument("--tau", help="write the density matrix CSV here")
    p.add_argument("--cert", action="store_true", help="include the certificate JSON")
    _add_sampling(p)
    p.set_defaults(func=_cmd_robust)

    p = sub.add_parser("entangled", help="Schmidt-rank truncation of a bipartite state")
    _add_common(p, state_help="path to JSON with fields a, b, state")
    p.add_argument("--mode", choices=("trace", "robust"), default="trace")
    p.add_argument("--ensemble", action="store_true")
    _add_sampling(p)
    p.set_defaults(func=_cmd_entangled)

    p = sub.add_parser("maxent-fit", help="fit subset-distribution weights to marginals")
    p.add_argument("marginals", help="path to the target marginals JSON")
    p.add_argument("--pairs", help="write the pair-marginal matrix CSV here")
    p.set_defaults(func=_cmd_maxent_fit)

    p = sub.add_parser("powerlaw", help="advantage-exponent sweep over power-law states")
    p.add_argument("--d", type=int, default=4096)
    p.add_argument("--gamma", required=True, help="comma-separated gamma values")
    p.add_argument("--k-list", required=True, help="comma-separated k values")
    p.add_argument("--fit-points", type=int, default=10)
    p.add_argument("--out", default="-", help="CSV destination ('-' = stdout)")
    p.set_defaults(func=_cmd_powerlaw)

    p = sub.add_parser("mps", help="randomized bond-truncation experiment")
    p.add_argument("--config", required=True, help="path to the experiment config JSON")
    p.add_argument("--out", default="-", help="CSV destination ('-' = stdout)")
    p.set_defaults(func=_cmd_mps)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports all failures
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
